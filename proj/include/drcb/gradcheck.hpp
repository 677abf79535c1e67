#pragma once

#include "drcb/tensor.hpp"

namespace drcb {

struct GradCheckResult {
    std::vector<double> max_rel_error;  // one entry per checked input
    double worst = 0.0;
    bool ok(double tol) const { return worst < tol; }
};

// Compares tape gradients against central finite differences for a scalar
// function of several input tensors. `f` must rebuild its graph on every call
// (define-by-run), so perturbed evaluations see fresh values.
//
// Relative error uses max(|a|,|b|,1e-5) as denominator: below that scale the
// comparison is effectively absolute, which keeps near-zero true gradients
// from inflating the ratio.
inline GradCheckResult grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f,
                                  std::vector<Tensor>& inputs, double h = 1e-5,
                                  std::size_t max_coords_per_input = 0) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tensor loss = f(inputs);
    backward(loss);

    GradCheckResult res;
    res.max_rel_error.assign(inputs.size(), 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Tensor& t = inputs[i];
        const std::vector<double> analytic = t.grad();
        std::size_t n = t.numel();
        std::size_t stride = 1;
        if (max_coords_per_input > 0 && n > max_coords_per_input)
            stride = (n + max_coords_per_input - 1) / max_coords_per_input;
        NoGradGuard ng;  // perturbed evaluations need values only
        for (std::size_t j = 0; j < n; j += stride) {
            double orig = t.data()[j];
            t.data()[j] = orig + h;
            double fp = f(inputs).item();
            t.data()[j] = orig - h;
            double fm = f(inputs).item();
            t.data()[j] = orig;
            double fd = (fp - fm) / (2.0 * h);
            double denom = std::max({std::fabs(analytic[j]), std::fabs(fd), 1e-5});
            double rel = std::fabs(analytic[j] - fd) / denom;
            res.max_rel_error[i] = std::max(res.max_rel_error[i], rel);
        }
        res.worst = std::max(res.worst, res.max_rel_error[i]);
    }
    return res;
}

}  // namespace drcb
