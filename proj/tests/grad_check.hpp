#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "seal/tensor.hpp"

namespace testutil {

struct GradReport {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

// Central differences of a scalar function against analytic gradients of the
// leaves. Relative error per entry: |a - n| / max(|a|, |n|, floor).
inline GradReport grad_check(const std::function<seal::ag::Tensor()>& f, std::vector<seal::ag::Tensor> leaves,
                             double eps, double floor = 1e-6)
{
    for (auto& l : leaves) l.zero_grad();
    f().backward();
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) analytic.push_back(l.grad());
    GradReport r;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        auto& v = leaves[i].mutable_value();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double orig = v[k];
            double up, down;
            {
                seal::ag::NoGradGuard ng;
                v[k] = orig + eps;
                up = f().item();
                v[k] = orig - eps;
                down = f().item();
            }
            v[k] = orig;
            const double num = (up - down) / (2 * eps);
            const double a = analytic[i].empty() ? 0.0 : analytic[i][k];
            const double denom = std::max({std::abs(a), std::abs(num), floor});
            r.max_rel = std::max(r.max_rel, std::abs(a - num) / denom);
            ++r.checked;
        }
    }
    return r;
}

}  // namespace testutil
