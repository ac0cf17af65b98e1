#pragma once

// Central finite-difference gradient oracle. Lives in test code and stays
// independent of the tape's backward path: it only re-evaluates the forward
// value under perturbed parameters.

#include <algorithm>
#include <cmath>
#include <vector>

#include "nesycl/tensor.hpp"

namespace nesycl::testing {

inline double rel_err(double analytic, double fd) {
    const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-4});
    return std::abs(analytic - fd) / denom;
}

// Assumes analytic grads are already populated in the tensors; `forward`
// must recompute the scalar loss from the current parameter values.
template <typename Forward>
double max_grad_rel_error(const std::vector<Tensor*>& params, Forward&& forward, double h = 1e-5) {
    double worst = 0.0;
    for (Tensor* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double keep = p->data[i];
            p->data[i] = keep + h;
            const double up = forward();
            p->data[i] = keep - h;
            const double down = forward();
            p->data[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, rel_err(p->grad[i], fd));
        }
    }
    return worst;
}

}  // namespace nesycl::testing
