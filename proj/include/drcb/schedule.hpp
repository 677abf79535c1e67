#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcb {

// Variance schedule for the forward corruption process. Index t runs 1..T;
// vectors are stored 0-based, so beta(t) reads betas[t-1]. alpha_bar(0) = 1
// by convention, which makes the posterior coefficient at t = 1 collapse to
// a deterministic reconstruction.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;       // beta_t
    std::vector<double> alphas;      // 1 - beta_t
    std::vector<double> alpha_bars;  // prod_{s<=t} alpha_s
    std::vector<double> post_vars;   // beta_t * (1 - abar_{t-1}) / (1 - abar_t)

    double beta(int t) const { return betas[static_cast<std::size_t>(t - 1)]; }
    double alpha(int t) const { return alphas[static_cast<std::size_t>(t - 1)]; }
    double alpha_bar(int t) const {
        return t == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(t - 1)];
    }
    double posterior_var(int t) const { return post_vars[static_cast<std::size_t>(t - 1)]; }

    void validate() const {
        if (T < 1 || static_cast<int>(betas.size()) != T)
            throw std::invalid_argument("NoiseSchedule: needs T >= 1 betas");
        for (double b : betas)
            if (!(b > 0.0 && b < 1.0))
                throw std::invalid_argument("NoiseSchedule: beta " + std::to_string(b) +
                                            " outside (0,1)");
        for (int t = 1; t <= T; ++t)
            if (!(alpha_bar(t) < alpha_bar(t - 1)))
                throw std::invalid_argument("NoiseSchedule: alpha_bar not strictly decreasing");
    }
};

inline NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_linear_schedule: T must be >= 1");
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alphas.resize(static_cast<std::size_t>(T));
    s.alpha_bars.resize(static_cast<std::size_t>(T));
    s.post_vars.resize(static_cast<std::size_t>(T));
    double abar = 1.0;
    for (int t = 1; t <= T; ++t) {
        double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        double b = beta_start + (beta_end - beta_start) * frac;
        double abar_prev = abar;
        abar *= 1.0 - b;
        s.betas[static_cast<std::size_t>(t - 1)] = b;
        s.alphas[static_cast<std::size_t>(t - 1)] = 1.0 - b;
        s.alpha_bars[static_cast<std::size_t>(t - 1)] = abar;
        s.post_vars[static_cast<std::size_t>(t - 1)] = b * (1.0 - abar_prev) / (1.0 - abar);
    }
    s.validate();
    return s;
}

// Endpoints follow the common 1e-4..0.02 profile defined at 1000 steps,
// rescaled so a shorter chain still ends near-fully corrupted
// (1 - alpha_bar_T >= 0.99).
inline NoiseSchedule default_schedule(int T = 200) {
    double k = 1000.0 / T;
    return make_linear_schedule(T, 1e-4 * k, 0.02 * k);
}

}  // namespace drcb
