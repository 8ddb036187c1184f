#pragma once

// Central finite-difference verification of reverse-mode gradients.

#include <cmath>
#include <functional>
#include <vector>

#include "sea/tensor.hpp"

namespace sea {

// f rebuilds the scalar loss from the current parameter values each call.
// Returns max over all parameter entries of the relative error between the
// analytic gradient and a central difference with step eps.
inline double grad_check(const std::function<Tensor()>& f, std::vector<Tensor>& params,
                         double eps = 1e-5) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

    for (auto& p : params) p.zero_grad();
    Tensor loss = f();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + eps;
            const double fp = f().item();
            vals[i] = saved - eps;
            const double fm = f().item();
            vals[i] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi][i];
            // denominator floor sits above the central-difference roundoff
            // noise (~1e-11 for unit-scale losses), where relative
            // comparison is meaningless
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace sea
