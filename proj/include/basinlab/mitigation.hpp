#pragma once

#include <vector>

#include "basinlab/denoiser.hpp"
#include "basinlab/sampler.hpp"
#include "basinlab/vec.hpp"

namespace basinlab {

/// Batch-wise adjustment hyperparameters. gamma_tilde is the noise-space step
/// size (the raw data-space step divided by sqrt(1 - alpha_bar_T) is never
/// stored); rho is the sharpness radius; m_steps the number of adjustment
/// iterations; tau the CFG start timestep for the subsequent deferred
/// sampling.
struct BatchwiseConfig {
    double gamma_tilde = 0.7;
    double rho = 0.70710678118654752;  // 0.5 * sqrt(d) at the default d = 2
    int m_steps = 2;
    int tau = 22;
};

/// Per-sample adjustment hyperparameters: descend the residual norm with
/// adaptive moments and decoupled weight decay until it falls below l_target.
struct PersampleConfig {
    double l_target = 0.7;
    double learning_rate = 0.01;
    double weight_decay = 0.01;
    int max_iters = 10000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct Perturbation {
    Vec delta;
    bool zero_residual = false;  // input residual vanished; delta is the zero vector
};

/// Worst-case ascent direction on the rho-ball:
///   delta = rho * residual / ||residual||  (evaluated at t = T).
/// A zero residual yields the zero vector with the warning flag set instead of
/// an error, since a zero-residual input needs no adjustment.
Perturbation sharpness_perturbation(const Denoiser& den, const Vec& x_T, int y, double rho);

struct BatchAdjustStats {
    int zero_residual_events = 0;
};

/// M iterations per sample of
///   x <- x - gamma_tilde * (residual(x + delta_hat(x)) - residual(x)),
/// each element adjusted independently. Exactly 4*m_steps evaluations per
/// sample. Throws DivergenceError carrying the sample index if an update goes
/// non-finite.
std::vector<Vec> batchwise_adjust(const Denoiser& den, std::vector<Vec> batch, int y,
                                  const BatchwiseConfig& cfg, BatchAdjustStats* stats = nullptr);

/// The full batch-wise procedure: adjust, then sample every element with the
/// deferred policy (unconditional while t > tau, CFG with w_cfg once t <= tau).
/// When given, opts supplies per-element trace provenance and must match the
/// batch length.
std::vector<TrajectoryTrace> batchwise_mitigate(const Denoiser& den, std::vector<Vec> batch, int y,
                                                const BatchwiseConfig& cfg, double w_cfg,
                                                const NoiseSchedule& schedule,
                                                const std::vector<SampleOptions>& opts = {});

struct PersampleResult {
    Vec x;
    int iterations = 0;
};

/// Gradient descent on ||residual(x, T, y)|| with adaptive moments and
/// decoupled weight decay. The loss check precedes the step, so an input that
/// already satisfies the target is returned unchanged with 0 iterations.
/// Throws ConvergenceError with the final loss when max_iters is exhausted.
PersampleResult persample_adjust(const Denoiser& den, Vec x_T, int y, const PersampleConfig& cfg);

/// Per-sample procedure: adjust, then sample with constant CFG from t = T.
TrajectoryTrace persample_mitigate(const Denoiser& den, Vec x_T, int y,
                                   const PersampleConfig& cfg, double w_cfg,
                                   const NoiseSchedule& schedule, const SampleOptions& opts = {});

}  // namespace basinlab
