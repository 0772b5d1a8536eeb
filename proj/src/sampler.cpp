#include "basinlab/sampler.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "basinlab/csv.hpp"
#include "basinlab/errors.hpp"

namespace basinlab {

Vec cfg_noise(const Denoiser& den, const Vec& x, int t, int y, double w_cfg) {
    if (w_cfg < 0.0) throw ConfigError("w_cfg must be >= 0");
    const Vec e_y = den.eval(x, t, y);
    Vec out = den.eval(x, t, kNullCond);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w_cfg * (e_y[i] - out[i]);
    return out;
}

Vec reverse_step(const Vec& x_t, const Vec& eps, int t, const NoiseSchedule& schedule) {
    const double alpha = schedule.alpha_at(t);
    const double alpha_bar = schedule.alpha_bar_at(t);
    const double coef = (1.0 - alpha) / std::sqrt(1.0 - alpha_bar);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = inv_sqrt_alpha * (x_t[i] - coef * eps[i]);
    return out;
}

TrajectoryTrace sample(const Denoiser& den, const GuidancePolicy& policy, Vec x_T, int y,
                       const NoiseSchedule& schedule, const SampleOptions& opts) {
    if (static_cast<int>(x_T.size()) != den.dim())
        throw ConfigError("initial state dimension mismatch");
    if (policy.kind == GuidancePolicy::Kind::deferred &&
        (policy.tau < 0 || policy.tau > schedule.T()))
        throw ConfigError("deferred policy requires 0 <= tau <= T");
    if (policy.kind != GuidancePolicy::Kind::none && policy.w_cfg < 0.0)
        throw ConfigError("w_cfg must be >= 0");

    const int T = schedule.T();
    TrajectoryTrace trace;
    trace.seed = opts.seed;
    trace.condition_id = opts.condition_id;
    trace.timesteps.reserve(static_cast<std::size_t>(T));
    trace.residual_norms.reserve(static_cast<std::size_t>(T));
    if (opts.record_states) trace.states.reserve(static_cast<std::size_t>(T));

    Vec x = std::move(x_T);
    for (int t = T; t >= 1; --t) {
        // Both evaluations happen unconditionally so the residual trace exists
        // under every policy.
        const Vec e_y = den.eval(x, t, y);
        const Vec e_null = den.eval(x, t, kNullCond);
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < e_y.size(); ++i) {
            const double r = e_y[i] - e_null[i];
            norm_sq += r * r;
        }
        trace.timesteps.push_back(t);
        trace.residual_norms.push_back(std::sqrt(norm_sq));
        if (opts.record_states) trace.states.push_back(x);

        bool guided = false;
        switch (policy.kind) {
            case GuidancePolicy::Kind::none: guided = false; break;
            case GuidancePolicy::Kind::constant: guided = true; break;
            case GuidancePolicy::Kind::deferred: guided = (t <= policy.tau); break;
        }
        Vec eps = e_null;
        if (guided)
            for (std::size_t i = 0; i < eps.size(); ++i)
                eps[i] += policy.w_cfg * (e_y[i] - e_null[i]);
        x = reverse_step(x, eps, t, schedule);
        if (!all_finite(x))
            throw DivergenceError("trajectory diverged at t=" + std::to_string(t), t);
    }
    trace.final_state = std::move(x);
    return trace;
}

TrajectoryTrace trace_without_cfg(const Denoiser& den, Vec x_T, int y,
                                  const NoiseSchedule& schedule, const SampleOptions& opts) {
    return sample(den, GuidancePolicy::none(), std::move(x_T), y, schedule, opts);
}

void write_trace_csv(std::ostream& out, std::span<const TrajectoryTrace> traces,
                     bool include_states, std::span<const std::string> header_lines) {
    for (const auto& line : header_lines) out << "# " << line << "\n";
    std::size_t d = 0;
    if (include_states)
        for (const auto& tr : traces)
            if (!tr.states.empty()) d = tr.states.front().size();
    out << "seed,condition_id,t,residual_norm";
    for (std::size_t i = 1; i <= d; ++i) out << ",x_" << i;
    out << "\n";
    for (const auto& tr : traces) {
        for (std::size_t k = 0; k < tr.timesteps.size(); ++k) {
            out << tr.seed << ',' << tr.condition_id << ',' << tr.timesteps[k] << ','
                << csv_double(tr.residual_norms[k]);
            if (d > 0) {
                if (k < tr.states.size())
                    for (std::size_t i = 0; i < d; ++i) out << ',' << csv_double(tr.states[k][i]);
                else
                    for (std::size_t i = 0; i < d; ++i) out << ',';
            }
            out << "\n";
        }
    }
}

std::vector<TrajectoryTrace> read_trace_csv(std::istream& in) {
    std::vector<TrajectoryTrace> traces;
    std::string line;
    bool header_seen = false;
    std::size_t d = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            const auto cols = split_csv_line(line);
            if (cols.size() < 4 || cols[0] != "seed" || cols[2] != "t")
                throw ConfigError("not a trace CSV (unexpected header)");
            d = cols.size() - 4;
            continue;
        }
        const auto cols = split_csv_line(line);
        if (cols.size() < 4) throw ConfigError("malformed trace CSV row");
        const std::uint64_t seed = std::stoull(cols[0]);
        const std::string& cid = cols[1];
        if (traces.empty() || traces.back().seed != seed || traces.back().condition_id != cid) {
            TrajectoryTrace t;
            t.seed = seed;
            t.condition_id = cid;
            traces.push_back(std::move(t));
        }
        auto& tr = traces.back();
        tr.timesteps.push_back(std::stoi(cols[2]));
        tr.residual_norms.push_back(std::stod(cols[3]));
        if (d > 0 && cols.size() == 4 + d && !cols[4].empty()) {
            Vec state(d);
            for (std::size_t i = 0; i < d; ++i) state[i] = std::stod(cols[4 + i]);
            tr.states.push_back(std::move(state));
        }
    }
    return traces;
}

}  // namespace basinlab
