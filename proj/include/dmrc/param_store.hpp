// Named trainable tensors with reproducible initialization.
//
// Initialization is a pure function of (store seed, parameter name, shape):
// the name is hashed into the seed, the mixed value seeds an mt19937_64, and
// uniform doubles are drawn as (x >> 11) * 2^-53. No standard-library
// distribution objects are involved, so two stores built with the same seed
// are bit-identical on any platform regardless of creation order.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmrc/tensor.hpp"

namespace dmrc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
    return splitmix64(seed ^ splitmix64(fnv1a(tag)));
}

// uniform double in [0,1) from the full 64-bit output; portable bit-exactly
inline double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

// uniform integer in [0,n) by rejection; avoids the implementation-defined
// behaviour of std::uniform_int_distribution
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

}  // namespace detail

enum class Init { Glorot, Zeros };

inline std::vector<double> init_values(std::uint64_t seed, const std::string& name, const Shape& shape, Init init) {
    const int n = shape_count(shape);
    if (init == Init::Zeros) return std::vector<double>(n, 0.0);
    const int fan_out = shape[0];
    const int fan_in = shape.size() >= 2 ? shape[1] : 1;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(detail::mix_seed(seed, name));
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = (2.0 * detail::uniform01(rng) - 1.0) * bound;
    return v;
}

class ParamStore {
  public:
    explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

    Tensor& create(const std::string& name, Shape shape, Init init) {
        if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
        Tensor t(shape, init_values(seed_, name, shape, init), /*requires_grad=*/true);
        auto [it, ok] = params_.emplace(name, std::move(t));
        (void)ok;
        return it->second;
    }

    // for checkpoint loading: install explicit values
    Tensor& insert(const std::string& name, Tensor t) {
        if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
        t.set_requires_grad(true);
        auto [it, ok] = params_.emplace(name, std::move(t));
        (void)ok;
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
        return it->second;
    }
    const Tensor& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
        return it->second;
    }

    const std::map<std::string, Tensor>& entries() const { return params_; }
    std::map<std::string, Tensor>& entries() { return params_; }

    std::uint64_t seed() const { return seed_; }

    std::size_t num_params() const { return params_.size(); }
    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [name, t] : params_) n += t.values().size();
        return n;
    }

  private:
    std::uint64_t seed_;
    std::map<std::string, Tensor> params_;  // ordered: iteration order is part of determinism
};

}  // namespace dmrc
