// Central-difference gradient estimation, the independent oracle used to
// validate every tape gradient in the test suites.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "dmrc/param_store.hpp"
#include "dmrc/tensor.hpp"

namespace dmrc {

// Per-coordinate estimate (f(theta+eps) - f(theta-eps)) / (2 eps). f must be
// a pure deterministic function of the store's values.
inline std::map<std::string, Tensor> finite_difference_gradient(
    const std::function<double(const ParamStore&)>& f, const ParamStore& params, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("finite_difference_gradient: epsilon must be positive");
    ParamStore work = params;
    std::map<std::string, Tensor> out;
    for (const auto& [name, p] : params.entries()) {
        std::vector<double> grad(p.values().size(), 0.0);
        auto& theta = work.get(name).mutable_values();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double orig = theta[i];
            theta[i] = orig + epsilon;
            const double f_plus = f(work);
            theta[i] = orig - epsilon;
            const double f_minus = f(work);
            theta[i] = orig;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw std::runtime_error("finite_difference_gradient: f returned a non-finite value at " + name +
                                         "[" + std::to_string(i) + "]");
            grad[i] = (f_plus - f_minus) / (2.0 * epsilon);
        }
        out.emplace(name, Tensor(p.shape(), std::move(grad)));
    }
    return out;
}

// |a-b| / max(1, |a|, |b|): relative error at scale, absolute near zero.
inline double grad_rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_grad_rel_err(const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b) {
    double worst = 0.0;
    for (const auto& [name, ta] : a) {
        auto it = b.find(name);
        if (it == b.end()) throw std::invalid_argument("gradient maps disagree on parameter: " + name);
        const auto& va = ta.values();
        const auto& vb = it->second.values();
        if (va.size() != vb.size()) throw std::invalid_argument("gradient sizes disagree for: " + name);
        for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, grad_rel_err(va[i], vb[i]));
    }
    return worst;
}

}  // namespace dmrc
