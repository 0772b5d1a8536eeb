#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "basinlab/denoiser.hpp"
#include "basinlab/schedule.hpp"
#include "basinlab/vec.hpp"

namespace basinlab {

/// Per-timestep guidance rule. `deferred` runs unconditionally while t > tau
/// and applies CFG with w_cfg once t <= tau; `constant` ignores tau.
struct GuidancePolicy {
    enum class Kind { none, constant, deferred };

    Kind kind = Kind::none;
    double w_cfg = 0.0;
    int tau = 0;

    static GuidancePolicy none() { return {Kind::none, 0.0, 0}; }
    static GuidancePolicy constant(double w_cfg) { return {Kind::constant, w_cfg, 0}; }
    static GuidancePolicy deferred(double w_cfg, int tau) { return {Kind::deferred, w_cfg, tau}; }
};

/// Record of one reverse trajectory: timesteps T..1, the conditional-residual
/// magnitude at each of them, optional state snapshots, and the final x_0.
struct TrajectoryTrace {
    std::vector<int> timesteps;
    std::vector<double> residual_norms;
    std::vector<Vec> states;  // empty unless snapshots were requested
    Vec final_state;
    std::uint64_t seed = 0;
    std::string condition_id;
};

struct SampleOptions {
    bool record_states = false;
    std::uint64_t seed = 0;        // provenance only; x_T is supplied by the caller
    std::string condition_id;
};

/// eps_null + w_cfg * (eps_y - eps_null), from exactly two evaluations.
Vec cfg_noise(const Denoiser& den, const Vec& x, int t, int y, double w_cfg);

/// Deterministic reverse update
///   x_{t-1} = (x_t - (1 - alpha_t)/sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_t).
Vec reverse_step(const Vec& x_t, const Vec& eps, int t, const NoiseSchedule& schedule);

/// Full reverse process from x_T down to x_0. The conditional residual norm is
/// recorded at every timestep regardless of policy (two evaluations per step,
/// 2T total). Throws DivergenceError with the offending timestep if a state
/// goes non-finite.
TrajectoryTrace sample(const Denoiser& den, const GuidancePolicy& policy, Vec x_T, int y,
                       const NoiseSchedule& schedule, const SampleOptions& opts = {});

/// The measurement protocol for basin analysis: sample with no guidance,
/// recording the residual trace.
TrajectoryTrace trace_without_cfg(const Denoiser& den, Vec x_T, int y,
                                  const NoiseSchedule& schedule, const SampleOptions& opts = {});

/// Trace interchange CSV: `seed, condition_id, t, residual_norm` plus optional
/// state columns x_1..x_d. `header_lines` are written first, each prefixed '#'.
void write_trace_csv(std::ostream& out, std::span<const TrajectoryTrace> traces,
                     bool include_states, std::span<const std::string> header_lines);

/// Inverse of write_trace_csv for files produced by this tool (state columns
/// are read back when present).
std::vector<TrajectoryTrace> read_trace_csv(std::istream& in);

}  // namespace basinlab
