#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmrc/param_store.hpp"
#include "dmrc/tensor.hpp"

namespace dmrc {

enum class OptAlgo { Sgd, Adam };

inline const char* to_string(OptAlgo a) { return a == OptAlgo::Sgd ? "sgd" : "adam"; }

inline OptAlgo parse_opt_algo(const std::string& s) {
    if (s == "sgd") return OptAlgo::Sgd;
    if (s == "adam") return OptAlgo::Adam;
    throw std::invalid_argument("unknown optimizer: " + s);
}

struct OptimizerState {
    OptAlgo algo = OptAlgo::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::map<std::string, std::vector<double>> m;  // first moments, adam only
    std::map<std::string, std::vector<double>> v;  // second moments, adam only
};

// One update over every parameter in the store. Gradients must cover all of
// them and match shapes; moment buffers are allocated on first use.
inline void optimizer_step(OptimizerState& state, ParamStore& params,
                           const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, p] : params.entries()) {
        auto it = grads.find(name);
        if (it == grads.end()) throw std::invalid_argument("missing gradient for parameter: " + name);
        if (it->second.shape() != p.shape())
            throw std::invalid_argument("gradient shape " + shape_str(it->second.shape()) +
                                        " does not match parameter " + name + " " + shape_str(p.shape()));
    }
    state.step += 1;
    for (auto& [name, p] : params.entries()) {
        const auto& g = grads.at(name).values();
        auto& theta = p.mutable_values();
        if (state.algo == OptAlgo::Sgd) {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= state.lr * g[i];
            continue;
        }
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(theta.size(), 0.0);
        if (v.empty()) v.assign(theta.size(), 0.0);
        const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace dmrc
