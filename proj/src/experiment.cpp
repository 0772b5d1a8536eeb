#include "basinlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "basinlab/csv.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/mitigation.hpp"
#include "basinlab/rng.hpp"
#include "basinlab/svg.hpp"

namespace basinlab {

namespace {

constexpr std::uint64_t kInitStream = 0x1717c0ffeeULL;

struct EffectiveParams {
    BatchwiseConfig batchwise;
    PersampleConfig persample;
};

EffectiveParams apply_sweep(const ExperimentConfig& cfg, double value) {
    EffectiveParams p{cfg.mitigation.batchwise, cfg.mitigation.persample};
    switch (cfg.sweep.axis) {
        case SweepAxis::none: break;
        case SweepAxis::gamma_tilde: p.batchwise.gamma_tilde = value; break;
        case SweepAxis::l_target: p.persample.l_target = value; break;
        case SweepAxis::tau: p.batchwise.tau = static_cast<int>(value); break;
        case SweepAxis::weight_decay: p.persample.weight_decay = value; break;
    }
    return p;
}

std::string value_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '/' || c == ' ') c = '_';
    return out;
}

std::string seeds_line(const ExperimentConfig& cfg) {
    std::string line = "seeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) line += ',';
        line += std::to_string(cfg.seeds[i]);
    }
    return line;
}

}  // namespace

int configured_thread_count() {
    const char* env = std::getenv("BASINLAB_THREADS");
    if (!env || !*env) return 0;
    const int n = std::atoi(env);
    return n < 0 ? 0 : n;
}

std::unique_ptr<Denoiser> build_backend(const ExperimentConfig& cfg, double* initial_loss,
                                        double* final_loss) {
    const NoiseSchedule schedule =
        NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    if (cfg.backend.kind == BackendKind::analytic)
        return std::make_unique<GmmDenoiser>(cfg.world, schedule);

    if (!cfg.backend.model_path.empty())
        return std::make_unique<MlpDenoiser>(MlpDenoiser::load_json(cfg.backend.model_path));

    const Dataset dataset = sample_dataset(cfg.world, cfg.backend.n_per_condition,
                                           cfg.backend.duplication_factor, cfg.backend.dataset_seed);
    TrainResult trained =
        train_mlp(cfg.world, dataset, schedule, cfg.backend.train, cfg.backend.arch);
    if (initial_loss) *initial_loss = trained.initial_holdout_loss;
    if (final_loss) *final_loss = trained.final_holdout_loss;
    return std::make_unique<MlpDenoiser>(std::move(trained.model));
}

namespace {

RunRow execute_run(const ExperimentConfig& cfg, const Denoiser& backend,
                   const NoiseSchedule& schedule, double sweep_value, std::uint64_t seed,
                   std::size_t run_index) {
    RunRow row;
    row.run_index = run_index;
    row.sweep_value = sweep_value;
    row.seed = seed;

    Rng rng(mix_seed(seed, kInitStream));
    row.x_raw = rng.gauss_vec(cfg.world.d);

    const CountingDenoiser den(backend);
    SampleOptions opts;
    opts.seed = seed;
    opts.condition_id = cfg.condition;
    opts.record_states = cfg.save_states;

    try {
        const int y = cfg.condition_index();
        const EffectiveParams params = apply_sweep(cfg, sweep_value);
        const double eps_mem = cfg.resolved_eps_mem();
        GuidancePolicy policy = GuidancePolicy::constant(cfg.w_cfg);
        row.x_adjusted = row.x_raw;
        switch (cfg.mitigation.strategy) {
            case MitigationStrategy::none:
                break;
            case MitigationStrategy::static_tau:
                policy = GuidancePolicy::deferred(cfg.w_cfg, params.batchwise.tau);
                break;
            case MitigationStrategy::batchwise: {
                // element independence makes a singleton batch equal to any
                // larger batch containing this sample
                std::vector<Vec> batch{row.x_raw};
                row.x_adjusted = batchwise_adjust(den, std::move(batch), y, params.batchwise)[0];
                row.iterations = params.batchwise.m_steps;
                policy = GuidancePolicy::deferred(cfg.w_cfg, params.batchwise.tau);
                break;
            }
            case MitigationStrategy::persample: {
                auto adj = persample_adjust(den, row.x_raw, y, params.persample);
                row.x_adjusted = std::move(adj.x);
                row.iterations = adj.iterations;
                break;
            }
        }

        if (cfg.mitigation.strategy == MitigationStrategy::none ||
            cfg.mitigation.strategy == MitigationStrategy::static_tau) {
            row.trace = sample(den, policy, row.x_adjusted, y, schedule, opts);
            row.residual_raw = row.trace.residual_norms.front();
            row.residual_adjusted = row.residual_raw;
        } else {
            row.residual_raw = cond_residual(den, row.x_raw, schedule.T(), y).norm;
            row.trace = sample(den, policy, row.x_adjusted, y, schedule, opts);
            row.residual_adjusted = row.trace.residual_norms.front();
        }
        if (cfg.no_cfg_trace)
            row.diag_trace = trace_without_cfg(den, row.x_adjusted, y, schedule, opts);

        const TrajectoryTrace& analysed = cfg.no_cfg_trace ? row.diag_trace : row.trace;
        const TransitionPoint tp = detect_transition_point(analysed, cfg.r_min);
        row.transition_t = tp.timestep;
        row.drop_ratio = tp.drop_ratio;

        row.final_state = row.trace.final_state;
        for (const auto& target : cfg.world.duplicate_targets())
            if (dist2(row.final_state, target) <= eps_mem) row.hit = true;
        row.alignment = cfg.world.cond_log_density(row.final_state, y);
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    row.evals = den.evals();
    row.grads = den.grads();
    return row;
}

void write_runs_csv(const ExperimentConfig& cfg, const ExperimentReport& report,
                    const std::string& path) {
    std::ofstream out(path);
    out << "# config_digest=" << cfg.digest << "\n";
    out << "# " << seeds_line(cfg) << "\n";
    out << "run_id,sweep_axis,sweep_value,seed,hit,alignment,transition_t,drop_ratio,"
           "residual_raw,residual_adjusted,iterations,evals,grads,error\n";
    for (const auto& row : report.rows) {
        out << row.run_index << ',' << to_string(cfg.sweep.axis) << ','
            << csv_double(row.sweep_value) << ',' << row.seed << ',' << (row.hit ? 1 : 0) << ','
            << csv_double(row.alignment) << ',';
        if (row.transition_t) out << *row.transition_t;
        out << ',' << csv_double(row.drop_ratio) << ',' << csv_double(row.residual_raw) << ','
            << csv_double(row.residual_adjusted) << ',' << row.iterations << ',' << row.evals
            << ',' << row.grads << ',' << row.error << "\n";
    }
}

void write_metrics_csv(const ExperimentConfig& cfg, const ExperimentReport& report,
                       const std::string& path) {
    std::ofstream out(path);
    out << "# config_digest=" << cfg.digest << "\n";
    out << "# " << seeds_line(cfg) << "\n";
    out << "run_id,gamma_tilde,l_target,tau,hit_rate,alignment,diversity,transition_t,jsd\n";
    for (const auto& s : report.summaries) {
        const EffectiveParams p = apply_sweep(cfg, s.sweep_value);
        out << to_string(cfg.sweep.axis) << '=' << value_label(s.sweep_value) << ',';
        if (cfg.mitigation.strategy == MitigationStrategy::batchwise)
            out << csv_double(p.batchwise.gamma_tilde);
        out << ',';
        if (cfg.mitigation.strategy == MitigationStrategy::persample)
            out << csv_double(p.persample.l_target);
        out << ',';
        if (cfg.mitigation.strategy == MitigationStrategy::batchwise ||
            cfg.mitigation.strategy == MitigationStrategy::static_tau)
            out << p.batchwise.tau;
        out << ',' << csv_double(s.metrics.duplicate_hit_rate) << ','
            << csv_double(s.metrics.alignment) << ',' << csv_double(s.metrics.diversity) << ','
            << csv_double(s.median_transition) << ',' << csv_double(s.jsd) << "\n";
    }
}

void write_adjusted_states_csv(const ExperimentConfig& cfg, const std::vector<const RunRow*>& rows,
                               const std::string& path) {
    std::ofstream out(path);
    out << "# config_digest=" << cfg.digest << "\n";
    out << "# " << seeds_line(cfg) << "\n";
    out << "seed,stage";
    for (int i = 1; i <= cfg.world.d; ++i) out << ",x_" << i;
    out << ",residual_norm,iterations\n";
    for (const auto* row : rows) {
        if (!row->error.empty()) continue;
        out << row->seed << ",raw";
        for (double v : row->x_raw) out << ',' << csv_double(v);
        out << ',' << csv_double(row->residual_raw) << ",0\n";
        out << row->seed << ",adjusted";
        for (double v : row->x_adjusted) out << ',' << csv_double(v);
        out << ',' << csv_double(row->residual_adjusted) << ',' << row->iterations << "\n";
    }
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& dataset, const GmmWorld& world,
                       std::span<const std::string> header_lines) {
    for (const auto& line : header_lines) out << "# " << line << "\n";
    for (int i = 1; i <= world.d; ++i) out << "x_" << i << (i < world.d ? "," : "");
    out << ",condition_id,is_duplicate\n";
    std::vector<bool> dup(dataset.points.size(), false);
    for (std::size_t i : dataset.duplicate_index) dup[i] = true;
    for (std::size_t i = 0; i < dataset.points.size(); ++i) {
        const auto& p = dataset.points[i];
        for (int k = 0; k < world.d; ++k) {
            if (k) out << ',';
            out << csv_double(p.x0[static_cast<std::size_t>(k)]);
        }
        out << ',' << world.conditions[static_cast<std::size_t>(p.cond_index)].id << ','
            << (dup[i] ? 1 : 0) << "\n";
    }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
    const auto start = std::chrono::steady_clock::now();
    double init_loss = 0.0, final_loss = 0.0;
    const auto backend = build_backend(cfg, &init_loss, &final_loss);
    ExperimentReport report = run_experiment(cfg, *backend, write_outputs);
    report.train_initial_loss = init_loss;
    report.train_final_loss = final_loss;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Denoiser& backend,
                                bool write_outputs) {
    const auto start = std::chrono::steady_clock::now();
    const NoiseSchedule schedule =
        NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);

    std::vector<double> sweep_values = cfg.sweep.values;
    if (cfg.sweep.axis == SweepAxis::none || sweep_values.empty()) sweep_values = {0.0};

    struct Job {
        double value;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double v : sweep_values)
        for (std::uint64_t s : cfg.seeds) jobs.push_back({v, s});

    ExperimentReport report;
    report.config_digest = cfg.digest;
    report.rows.resize(jobs.size());

    const int threads = configured_thread_count();
    if (threads > 1) {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                report.rows[i] =
                    execute_run(cfg, backend, schedule, jobs[i].value, jobs[i].seed, i);
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(threads, static_cast<int>(jobs.size()));
        pool.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    } else {
        for (std::size_t i = 0; i < jobs.size(); ++i)
            report.rows[i] = execute_run(cfg, backend, schedule, jobs[i].value, jobs[i].seed, i);
    }

    // per sweep value summaries, in sweep order
    for (double v : sweep_values) {
        std::vector<const RunRow*> group;
        for (const auto& row : report.rows)
            if (row.sweep_value == v) group.push_back(&row);

        SweepSummary s;
        s.sweep_value = v;
        std::vector<Vec> finals;
        std::vector<double> raw_norms, adj_norms;
        TransitionGroup tg{v, {}};
        double residual_sum = 0.0;
        for (const auto* row : group) {
            if (!row->error.empty()) continue;
            ++s.ok_count;
            finals.push_back(row->final_state);
            raw_norms.push_back(norm2(row->x_raw));
            adj_norms.push_back(norm2(row->x_adjusted));
            tg.traces.push_back(cfg.no_cfg_trace ? row->diag_trace : row->trace);
            residual_sum += row->residual_adjusted;
        }
        if (s.ok_count > 0) {
            s.metrics =
                metric_report(finals, cfg.world, cfg.condition_index(), cfg.resolved_eps_mem());
            s.jsd = norm_distribution_jsd(adj_norms, raw_norms, cfg.jsd_bins).jsd;
            s.mean_residual_adjusted = residual_sum / static_cast<double>(s.ok_count);
            const TransitionGroup groups[] = {tg};
            const auto cmp = compare_transition_points(groups, cfg.r_min);
            s.median_transition = cmp.groups.front().median_timestep;
            s.absent_count = cmp.groups.front().absent_count;
        }
        report.summaries.push_back(std::move(s));
    }

    // cross-sweep transition comparison over successful runs
    {
        std::vector<TransitionGroup> groups;
        for (double v : sweep_values) {
            TransitionGroup tg{v, {}};
            for (const auto& row : report.rows)
                if (row.sweep_value == v && row.error.empty())
                    tg.traces.push_back(cfg.no_cfg_trace ? row.diag_trace : row.trace);
            if (!tg.traces.empty()) groups.push_back(std::move(tg));
        }
        if (!groups.empty()) report.transitions = compare_transition_points(groups, cfg.r_min);
    }

    if (write_outputs) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        const std::string axis = to_string(cfg.sweep.axis);
        write_runs_csv(cfg, report, cfg.out_dir + "/runs.csv");
        write_metrics_csv(cfg, report, cfg.out_dir + "/metrics.csv");

        {
            std::ofstream out(cfg.out_dir + "/transitions.csv");
            out << "# config_digest=" << cfg.digest << "\n";
            out << "# " << seeds_line(cfg) << "\n";
            out << "sweep_axis,sweep_value,median_transition_t,absent,n,monotone_earlier\n";
            for (const auto& g : report.transitions.groups)
                out << axis << ',' << csv_double(g.sweep_value) << ','
                    << csv_double(g.median_timestep) << ',' << g.absent_count << ','
                    << g.trace_count << ',' << (report.transitions.monotone_earlier ? 1 : 0)
                    << "\n";
        }

        SvgPlot overlay("residual magnitude during sampling", "t", "residual norm");
        for (double v : sweep_values) {
            std::vector<const RunRow*> group;
            for (const auto& row : report.rows)
                if (row.sweep_value == v) group.push_back(&row);

            std::vector<TrajectoryTrace> traces, diag;
            for (const auto* row : group) {
                if (!row->error.empty()) continue;
                traces.push_back(row->trace);
                if (cfg.no_cfg_trace) diag.push_back(row->diag_trace);
            }
            const std::string tag = sanitize(axis) + "_" + sanitize(value_label(v));
            std::vector<std::string> header{"config_digest=" + cfg.digest, seeds_line(cfg),
                                            "sweep=" + axis + "=" + value_label(v)};
            {
                std::ofstream out(cfg.out_dir + "/traces_" + tag + ".csv");
                write_trace_csv(out, traces, cfg.save_states, header);
            }
            if (cfg.no_cfg_trace) {
                std::ofstream out(cfg.out_dir + "/traces_nocfg_" + tag + ".csv");
                write_trace_csv(out, diag, cfg.save_states, header);
            }
            write_adjusted_states_csv(cfg, group, cfg.out_dir + "/adjusted_states_" + tag + ".csv");
            const auto& plot_source = cfg.no_cfg_trace ? diag : traces;
            if (!plot_source.empty()) {
                const auto& tr = plot_source.front();
                std::vector<double> xs(tr.timesteps.begin(), tr.timesteps.end());
                overlay.add_line(xs, tr.residual_norms, axis + "=" + value_label(v));
            }
        }
        {
            std::ofstream out(cfg.out_dir + "/overlay.svg");
            out << "<!-- config_digest=" << cfg.digest << " " << seeds_line(cfg) << " -->\n"
                << overlay.render();
        }
        {
            SvgPlot scatter("mitigation trade-off", "duplicate hit rate", "alignment");
            std::vector<double> xs, ys;
            for (const auto& s : report.summaries) {
                xs.push_back(s.metrics.duplicate_hit_rate);
                ys.push_back(s.metrics.alignment);
            }
            scatter.add_scatter(xs, ys, "sweep points");
            std::ofstream out(cfg.out_dir + "/tradeoff.svg");
            out << "<!-- config_digest=" << cfg.digest << " " << seeds_line(cfg) << " -->\n"
                << scatter.render();
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace basinlab
