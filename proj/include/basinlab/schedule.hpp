#pragma once

#include <vector>

#include "basinlab/vec.hpp"

namespace basinlab {

/// Diffusion time discretization and per-timestep noise coefficients.
/// Timesteps are integers 1..T; sampling walks them from T down to 1.
/// Immutable after construction, safe to share across threads.
struct NoiseSchedule {
    std::vector<double> beta;       // variance schedule, beta[t-1] in (0,1)
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // running product of alpha, strictly decreasing

    int T() const { return static_cast<int>(beta.size()); }

    double beta_at(int t) const;
    double alpha_at(int t) const;
    /// alpha_bar_at(0) == 1 by convention.
    double alpha_bar_at(int t) const;

    /// Arithmetic interpolation of beta from beta_start to beta_end over T steps.
    static NoiseSchedule linear(int T, double beta_start, double beta_end);

    /// Accepts an externally supplied beta array so non-linear schedules can be
    /// injected; validates the same invariants as the built-in constructor.
    static NoiseSchedule from_betas(std::vector<double> betas);
};

/// Closed-form marginal of the forward noising process:
/// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
Vec forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule);

}  // namespace basinlab
