#pragma once

#include <atomic>
#include <cstdint>

#include "basinlab/schedule.hpp"
#include "basinlab/vec.hpp"
#include "basinlab/world.hpp"

namespace basinlab {

/// Condition argument for the unconditional case.
inline constexpr int kNullCond = -1;

/// Noise-prediction abstraction. Implementations must be deterministic and
/// side-effect-free after construction; eval and input-gradient calls may run
/// concurrently from many threads.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual int dim() const = 0;
    virtual int num_timesteps() const = 0;

    /// Noise prediction at (x, t) for condition index y, or kNullCond for the
    /// unconditional case.
    virtual Vec eval(const Vec& x, int t, int y) const = 0;

    /// Exact gradient of x -> ||eval(x,t,y) - eval(x,t,null)||_2 with respect
    /// to x. Throws NumericError when the residual is zero (the norm has no
    /// gradient there).
    virtual Vec residual_norm_grad(const Vec& x, int t, int y) const = 0;
};

/// The conditional noise prediction eps(x,t,y) - eps(x,t,null) and its
/// magnitude, the central diagnostic of every trace.
struct ConditionalResidual {
    Vec value;
    double norm = 0.0;
};

/// Exactly two denoiser evaluations.
ConditionalResidual cond_residual(const Denoiser& den, const Vec& x, int t, int y);

/// Exact posterior-expected noise of a Gaussian-mixture world: the t-marginal
/// of condition y is the mixture over components k of
///   N(sqrt(alpha_bar_t) * mu_k, (alpha_bar_t * sigma_k^2 + 1 - alpha_bar_t) I)
/// and the prediction is -sqrt(1 - alpha_bar_t) times its score. The null
/// condition is the prior-weighted union of all conditional mixtures.
class GmmDenoiser final : public Denoiser {
public:
    GmmDenoiser(GmmWorld world, NoiseSchedule schedule);

    int dim() const override { return world_.d; }
    int num_timesteps() const override { return schedule_.T(); }

    Vec eval(const Vec& x, int t, int y) const override;
    Vec residual_norm_grad(const Vec& x, int t, int y) const override;

    /// Log density of the t-marginal mixture (y = kNullCond for the null
    /// mixture). Exposed for diagnostics.
    double marginal_log_density(const Vec& x, int t, int y) const;

    const GmmWorld& world() const { return world_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    GmmWorld world_;
    NoiseSchedule schedule_;
    std::vector<GmmComponent> null_mixture_;  // flattened prior-weighted union
};

/// Forwarding wrapper that counts evaluations and gradient calls; the NFE
/// bookkeeping for reports and the eval-count contracts in tests.
class CountingDenoiser final : public Denoiser {
public:
    explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

    int dim() const override { return inner_.dim(); }
    int num_timesteps() const override { return inner_.num_timesteps(); }

    Vec eval(const Vec& x, int t, int y) const override {
        evals_.fetch_add(1, std::memory_order_relaxed);
        return inner_.eval(x, t, y);
    }

    Vec residual_norm_grad(const Vec& x, int t, int y) const override {
        grads_.fetch_add(1, std::memory_order_relaxed);
        return inner_.residual_norm_grad(x, t, y);
    }

    std::uint64_t evals() const { return evals_.load(std::memory_order_relaxed); }
    std::uint64_t grads() const { return grads_.load(std::memory_order_relaxed); }
    void reset() const {
        evals_.store(0, std::memory_order_relaxed);
        grads_.store(0, std::memory_order_relaxed);
    }

private:
    const Denoiser& inner_;
    mutable std::atomic<std::uint64_t> evals_{0};
    mutable std::atomic<std::uint64_t> grads_{0};
};

}  // namespace basinlab
