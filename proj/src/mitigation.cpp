#include "basinlab/mitigation.hpp"

#include <cmath>
#include <string>

#include "basinlab/errors.hpp"

namespace basinlab {

Perturbation sharpness_perturbation(const Denoiser& den, const Vec& x_T, int y, double rho) {
    if (rho <= 0.0) throw ConfigError("sharpness radius rho must be > 0");
    const int T = den.num_timesteps();
    const ConditionalResidual r = cond_residual(den, x_T, T, y);
    if (r.norm == 0.0) return {Vec(x_T.size(), 0.0), true};
    return {scaled(r.value, rho / r.norm), false};
}

std::vector<Vec> batchwise_adjust(const Denoiser& den, std::vector<Vec> batch, int y,
                                  const BatchwiseConfig& cfg, BatchAdjustStats* stats) {
    if (batch.empty()) throw ConfigError("batchwise_adjust needs a nonempty batch");
    if (cfg.gamma_tilde < 0.0) throw ConfigError("gamma_tilde must be >= 0");
    if (cfg.rho <= 0.0) throw ConfigError("rho must be > 0");
    if (cfg.m_steps < 0) throw ConfigError("m_steps must be >= 0");
    const int T = den.num_timesteps();

    for (std::size_t s = 0; s < batch.size(); ++s) {
        Vec& x = batch[s];
        if (static_cast<int>(x.size()) != den.dim())
            throw ConfigError("batch element dimension mismatch");
        for (int step = 0; step < cfg.m_steps; ++step) {
            const ConditionalResidual base = cond_residual(den, x, T, y);
            Vec probe = x;
            if (base.norm == 0.0) {
                if (stats) ++stats->zero_residual_events;
            } else {
                axpy(probe, cfg.rho / base.norm, base.value);
            }
            const ConditionalResidual shifted = cond_residual(den, probe, T, y);
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] -= cfg.gamma_tilde * (shifted.value[i] - base.value[i]);
            if (!all_finite(x))
                throw DivergenceError("batch adjustment diverged (sample " + std::to_string(s) +
                                          ", step " + std::to_string(step + 1) + ")",
                                      T, static_cast<std::ptrdiff_t>(s));
        }
    }
    return batch;
}

std::vector<TrajectoryTrace> batchwise_mitigate(const Denoiser& den, std::vector<Vec> batch, int y,
                                                const BatchwiseConfig& cfg, double w_cfg,
                                                const NoiseSchedule& schedule,
                                                const std::vector<SampleOptions>& opts) {
    if (!opts.empty() && opts.size() != batch.size())
        throw ConfigError("per-sample options count does not match the batch");
    auto adjusted = batchwise_adjust(den, std::move(batch), y, cfg);
    std::vector<TrajectoryTrace> traces;
    traces.reserve(adjusted.size());
    const GuidancePolicy policy = GuidancePolicy::deferred(w_cfg, cfg.tau);
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
        const SampleOptions opt = opts.empty() ? SampleOptions{} : opts[i];
        traces.push_back(sample(den, policy, std::move(adjusted[i]), y, schedule, opt));
    }
    return traces;
}

PersampleResult persample_adjust(const Denoiser& den, Vec x_T, int y, const PersampleConfig& cfg) {
    if (cfg.l_target <= 0.0) throw ConfigError("l_target must be > 0");
    if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
    const int T = den.num_timesteps();

    Vec m(x_T.size(), 0.0), v(x_T.size(), 0.0);
    int iter = 0;
    while (true) {
        const ConditionalResidual r = cond_residual(den, x_T, T, y);
        if (r.norm < cfg.l_target) break;
        if (iter >= cfg.max_iters)
            throw ConvergenceError("per-sample adjustment did not reach l_target=" +
                                       std::to_string(cfg.l_target) + " after " +
                                       std::to_string(iter) + " iterations",
                                   r.norm, static_cast<std::size_t>(iter));
        const Vec grad = den.residual_norm_grad(x_T, T, y);
        ++iter;
        const double bc1 = 1.0 - std::pow(cfg.beta1, iter);
        const double bc2 = 1.0 - std::pow(cfg.beta2, iter);
        for (std::size_t i = 0; i < x_T.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            // decoupled decay acts on x directly, not through the moments
            x_T[i] -= cfg.learning_rate *
                      ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps) +
                       cfg.weight_decay * x_T[i]);
        }
        if (!all_finite(x_T))
            throw DivergenceError("per-sample adjustment diverged at iteration " +
                                      std::to_string(iter),
                                  T);
    }
    return {std::move(x_T), iter};
}

TrajectoryTrace persample_mitigate(const Denoiser& den, Vec x_T, int y,
                                   const PersampleConfig& cfg, double w_cfg,
                                   const NoiseSchedule& schedule, const SampleOptions& opts) {
    auto adjusted = persample_adjust(den, std::move(x_T), y, cfg);
    return sample(den, GuidancePolicy::constant(w_cfg), std::move(adjusted.x), y, schedule, opts);
}

}  // namespace basinlab
