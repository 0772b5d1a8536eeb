#pragma once

#include <optional>
#include <span>
#include <vector>

#include "basinlab/denoiser.hpp"
#include "basinlab/sampler.hpp"
#include "basinlab/vec.hpp"
#include "basinlab/world.hpp"

namespace basinlab {

/// A detected sharp drop in a residual trace. Absent when no drop clears the
/// threshold — absence is a valid result, read as "the basin was never
/// entered".
struct TransitionPoint {
    std::optional<int> timestep;
    double drop_ratio = 0.0;
};

/// Scans consecutive timestep pairs from T downward and returns the first t
/// where residual(t)/residual(t-1) >= r_min and residual(t-1) lies below the
/// trace median. Scale-free: uniform positive scaling of the trace leaves the
/// result unchanged.
TransitionPoint detect_transition_point(const TrajectoryTrace& trace, double r_min = 2.0);

struct TransitionGroup {
    double sweep_value = 0.0;
    std::vector<TrajectoryTrace> traces;
};

struct TransitionGroupSummary {
    double sweep_value = 0.0;
    /// Median over the group on the timestep scale, with absent transitions
    /// mapped to T+1 (earlier than every detectable timestep, since sampling
    /// starts at t = T).
    double median_timestep = 0.0;
    int absent_count = 0;
    std::size_t trace_count = 0;
};

struct TransitionComparison {
    std::vector<TransitionGroupSummary> groups;  // ordered by ascending sweep value
    /// True when median timesteps are non-decreasing as the sweep value grows,
    /// i.e. transitions move toward the start of sampling.
    bool monotone_earlier = false;
};

TransitionComparison compare_transition_points(std::span<const TransitionGroup> groups,
                                               double r_min = 2.0);

/// Desk-scale metric proxies over a set of final states.
struct MetricReport {
    double duplicate_hit_rate = 0.0;  // fraction within eps_mem of a duplicated point
    double alignment = 0.0;           // mean log p(x_0 | y) under the analytic conditional
    double diversity = 0.0;           // mean pairwise l2 distance
};

MetricReport metric_report(std::span<const Vec> final_states, const GmmWorld& world, int y,
                           double eps_mem);

/// log density of the chi distribution with d degrees of freedom:
///   (d-1) ln r - r^2/2 - (d/2 - 1) ln 2 - ln Gamma(d/2),  r > 0.
double chi_log_density(double r, int d);

/// The non-constant terms of the norm-regularized adjustment objective:
/// residual norm, the quadratic decay term w*||x||^2/2, and the log-radius
/// term -w*(d-1)*ln||x||. Their (decay + log-radius) sum differs from
/// -w * chi_log_density(||x||, d) only by a constant independent of x.
struct RegularizedTerms {
    double residual_norm = 0.0;
    double decay_term = 0.0;
    double log_radius_term = 0.0;
};

RegularizedTerms regularized_objective_terms(const Vec& x, const Denoiser& den, int y, double w);

/// Histogram comparison of two norm samples over their pooled range plus the
/// Jensen-Shannon divergence in nats (0 ln 0 = 0; bounded by ln 2).
struct NormDistributionReport {
    std::vector<double> bin_edges;       // bins + 1 entries
    std::vector<double> adjusted_mass;   // sums to 1
    std::vector<double> reference_mass;  // sums to 1
    double jsd = 0.0;
};

NormDistributionReport norm_distribution_jsd(std::span<const double> adjusted,
                                             std::span<const double> reference, int bins = 64);

}  // namespace basinlab
