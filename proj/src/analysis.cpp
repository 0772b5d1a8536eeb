#include "basinlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "basinlab/errors.hpp"

namespace basinlab {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TransitionPoint detect_transition_point(const TrajectoryTrace& trace, double r_min) {
    if (trace.residual_norms.size() < 2)
        throw ConfigError("transition detection needs a trace with at least 2 points");
    if (r_min <= 1.0) throw ConfigError("drop-ratio threshold must exceed 1");

    const double median = median_of(trace.residual_norms);
    // traces are stored in sampling order, T first
    for (std::size_t k = 0; k + 1 < trace.residual_norms.size(); ++k) {
        const double high = trace.residual_norms[k];
        const double low = trace.residual_norms[k + 1];
        if (high <= 0.0) continue;  // nothing to drop from
        const double ratio = (low > 0.0) ? high / low : std::numeric_limits<double>::infinity();
        if (ratio >= r_min && low < median) return {trace.timesteps[k], ratio};
    }
    return {std::nullopt, 0.0};
}

TransitionComparison compare_transition_points(std::span<const TransitionGroup> groups,
                                               double r_min) {
    TransitionComparison cmp;
    int T = -1;
    for (const auto& g : groups) {
        if (g.traces.empty()) throw ConfigError("transition comparison: empty sweep group");
        TransitionGroupSummary s;
        s.sweep_value = g.sweep_value;
        s.trace_count = g.traces.size();
        std::vector<double> values;
        values.reserve(g.traces.size());
        for (const auto& trace : g.traces) {
            const int trace_T = trace.timesteps.empty() ? 0 : trace.timesteps.front();
            if (T < 0) T = trace_T;
            if (trace_T != T)
                throw ConfigError("transition comparison: traces mix different T (" +
                                  std::to_string(T) + " vs " + std::to_string(trace_T) + ")");
            const TransitionPoint tp = detect_transition_point(trace, r_min);
            if (tp.timestep) {
                values.push_back(static_cast<double>(*tp.timestep));
            } else {
                // never entered the basin: earlier than any detectable timestep
                values.push_back(static_cast<double>(T + 1));
                ++s.absent_count;
            }
        }
        s.median_timestep = median_of(std::move(values));
        cmp.groups.push_back(s);
    }
    std::sort(cmp.groups.begin(), cmp.groups.end(),
              [](const auto& a, const auto& b) { return a.sweep_value < b.sweep_value; });
    cmp.monotone_earlier = true;
    for (std::size_t i = 1; i < cmp.groups.size(); ++i)
        if (cmp.groups[i].median_timestep < cmp.groups[i - 1].median_timestep)
            cmp.monotone_earlier = false;
    return cmp;
}

MetricReport metric_report(std::span<const Vec> final_states, const GmmWorld& world, int y,
                           double eps_mem) {
    if (final_states.empty()) throw ConfigError("metric_report needs at least one state");
    const auto targets = world.duplicate_targets();

    MetricReport report;
    double align_sum = 0.0;
    std::size_t hits = 0;
    for (const auto& x : final_states) {
        bool hit = false;
        for (const auto& tgt : targets)
            if (dist2(x, tgt) <= eps_mem) {
                hit = true;
                break;
            }
        hits += hit ? 1 : 0;
        align_sum += world.cond_log_density(x, y);
    }
    report.duplicate_hit_rate = static_cast<double>(hits) / static_cast<double>(final_states.size());
    report.alignment = align_sum / static_cast<double>(final_states.size());

    double dist_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < final_states.size(); ++i)
        for (std::size_t j = i + 1; j < final_states.size(); ++j) {
            dist_sum += dist2(final_states[i], final_states[j]);
            ++pairs;
        }
    report.diversity = pairs > 0 ? dist_sum / static_cast<double>(pairs) : 0.0;
    return report;
}

double chi_log_density(double r, int d) {
    if (r <= 0.0) throw NumericError("chi density defined for r > 0");
    if (d < 1) throw ConfigError("chi density needs d >= 1");
    const double half_d = 0.5 * static_cast<double>(d);
    return (d - 1) * std::log(r) - 0.5 * r * r - (half_d - 1.0) * std::log(2.0) -
           std::lgamma(half_d);
}

RegularizedTerms regularized_objective_terms(const Vec& x, const Denoiser& den, int y, double w) {
    const double radius = norm2(x);
    if (radius <= 0.0) throw NumericError("regularized objective undefined at the zero state");
    RegularizedTerms terms;
    terms.residual_norm = cond_residual(den, x, den.num_timesteps(), y).norm;
    terms.decay_term = 0.5 * w * radius * radius;
    terms.log_radius_term = -w * (den.dim() - 1) * std::log(radius);
    return terms;
}

NormDistributionReport norm_distribution_jsd(std::span<const double> adjusted,
                                             std::span<const double> reference, int bins) {
    if (adjusted.empty() || reference.empty())
        throw ConfigError("norm_distribution_jsd needs nonempty sample sets");
    if (bins < 2) throw ConfigError("norm_distribution_jsd needs at least 2 bins");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : adjusted) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : reference) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;  // all values identical: everything lands in bin 0

    NormDistributionReport report;
    report.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b)
        report.bin_edges[static_cast<std::size_t>(b)] = lo + width * b;

    auto histogram = [&](std::span<const double> sample) {
        std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
        const double w = 1.0 / static_cast<double>(sample.size());
        for (double v : sample) {
            int b = static_cast<int>((v - lo) / width);
            b = std::clamp(b, 0, bins - 1);
            mass[static_cast<std::size_t>(b)] += w;
        }
        return mass;
    };
    report.adjusted_mass = histogram(adjusted);
    report.reference_mass = histogram(reference);

    double jsd = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double p = report.adjusted_mass[static_cast<std::size_t>(b)];
        const double q = report.reference_mass[static_cast<std::size_t>(b)];
        const double m = 0.5 * (p + q);
        if (p > 0.0) jsd += 0.5 * p * std::log(p / m);
        if (q > 0.0) jsd += 0.5 * q * std::log(q / m);
    }
    report.jsd = std::max(0.0, jsd);
    return report;
}

}  // namespace basinlab
