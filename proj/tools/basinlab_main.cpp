#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "basinlab/analysis.hpp"
#include "basinlab/config.hpp"
#include "basinlab/csv.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/experiment.hpp"
#include "basinlab/mlp.hpp"
#include "basinlab/rng.hpp"
#include "basinlab/svg.hpp"

namespace {

using namespace basinlab;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* c = cmd->add_option("--config", args.config_path, "experiment config file");
    if (config_required) c->required();
    cmd->add_option("--seed", args.seed, "seed override");
    cmd->add_option("--out", args.out, "output directory override");
    cmd->add_option("--format", args.format, "output format")
        ->check(CLI::IsMember({"csv", "svg"}));
}

ExperimentConfig load(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (!args.out.empty()) cfg.out_dir = args.out;
    return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + name;
}

int cmd_world_gen(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    const std::uint64_t seed = args.seed.value_or(cfg.backend.dataset_seed);
    const Dataset ds = sample_dataset(cfg.world, cfg.backend.n_per_condition,
                                      cfg.backend.duplication_factor, seed);
    std::ofstream out(out_path(cfg, "dataset.csv"));
    const std::vector<std::string> header{"config_digest=" + cfg.digest,
                                          "seed=" + std::to_string(seed)};
    write_dataset_csv(out, ds, cfg.world, header);
    std::cout << "wrote " << cfg.out_dir << "/dataset.csv (" << ds.points.size() << " points, "
              << ds.duplicate_index.size() << " duplicates)\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    if (args.seed) cfg.backend.train.seed = *args.seed;
    const NoiseSchedule schedule =
        NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const Dataset ds = sample_dataset(cfg.world, cfg.backend.n_per_condition,
                                      cfg.backend.duplication_factor, cfg.backend.dataset_seed);
    const TrainResult res = train_mlp(cfg.world, ds, schedule, cfg.backend.train, cfg.backend.arch);
    res.model.save_json(out_path(cfg, "model.json"));
    {
        std::ofstream out(out_path(cfg, "training_loss.csv"));
        out << "# config_digest=" << cfg.digest << "\n";
        out << "# seed=" << cfg.backend.train.seed << "\n";
        out << "step,loss\n";
        for (std::size_t i = 0; i < res.loss_history.size(); ++i)
            out << (i + 1) << ',' << csv_double(res.loss_history[i]) << "\n";
    }
    std::cout << "holdout loss " << res.initial_holdout_loss << " -> " << res.final_holdout_loss
              << "; model saved to " << cfg.out_dir << "/model.json\n";
    return 0;
}

int cmd_trace(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    const auto backend = build_backend(cfg);
    const NoiseSchedule schedule =
        NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const std::uint64_t seed = args.seed.value_or(cfg.seeds.front());

    Rng rng(mix_seed(seed, 0x1717c0ffeeULL));
    SampleOptions opts;
    opts.seed = seed;
    opts.condition_id = cfg.condition;
    opts.record_states = cfg.save_states;
    const TrajectoryTrace trace = trace_without_cfg(
        *backend, rng.gauss_vec(cfg.world.d), cfg.condition_index(), schedule, opts);

    const std::string name = "trace_seed" + std::to_string(seed);
    const std::vector<std::string> header{"config_digest=" + cfg.digest,
                                          "seed=" + std::to_string(seed)};
    {
        std::ofstream out(out_path(cfg, name + ".csv"));
        write_trace_csv(out, {&trace, 1}, cfg.save_states, header);
    }
    if (args.format == "svg") {
        SvgPlot plot("residual magnitude, no guidance", "t", "residual norm");
        plot.add_line(std::vector<double>(trace.timesteps.begin(), trace.timesteps.end()),
                      trace.residual_norms, "seed " + std::to_string(seed));
        std::ofstream out(out_path(cfg, name + ".svg"));
        out << "<!-- config_digest=" << cfg.digest << " seed=" << seed << " -->\n"
            << plot.render();
    }
    std::cout << "wrote " << cfg.out_dir << "/" << name << ".csv\n";
    return 0;
}

int run_and_print(ExperimentConfig cfg) {
    const ExperimentReport report = run_experiment(cfg);
    std::size_t failed = 0;
    for (const auto& row : report.rows)
        if (!row.error.empty()) ++failed;
    std::cout << report.rows.size() << " runs (" << failed << " failed), outputs under "
              << cfg.out_dir << "\n";
    for (const auto& s : report.summaries)
        std::cout << "  " << to_string(cfg.sweep.axis) << "=" << s.sweep_value
                  << ": hit_rate=" << s.metrics.duplicate_hit_rate
                  << " alignment=" << s.metrics.alignment
                  << " median_transition=" << s.median_transition << " jsd=" << s.jsd << "\n";
    if (report.transitions.groups.size() > 1)
        std::cout << "  transitions monotone-earlier: "
                  << (report.transitions.monotone_earlier ? "yes" : "no") << "\n";
    std::cout << "  wall time " << report.wall_seconds << " s\n";
    return 0;
}

int cmd_mitigate(const CommonArgs& args, MitigationStrategy strategy) {
    ExperimentConfig cfg = load(args);
    cfg.mitigation.strategy = strategy;
    if (args.seed) cfg.seeds = {*args.seed};
    return run_and_print(std::move(cfg));
}

int cmd_sweep(const CommonArgs& args) {
    ExperimentConfig cfg = load(args);
    if (args.seed) cfg.seeds = {*args.seed};
    return run_and_print(std::move(cfg));
}

int cmd_analyze(const CommonArgs& args, const std::vector<std::string>& inputs) {
    double r_min = 2.0;
    std::string out_dir = "out";
    std::string digest = "none";
    if (!args.config_path.empty()) {
        const ExperimentConfig cfg = load_config(args.config_path);
        r_min = cfg.r_min;
        out_dir = cfg.out_dir;
        digest = cfg.digest;
    }
    if (!args.out.empty()) out_dir = args.out;
    if (inputs.empty()) throw ConfigError("analyze needs at least one trace CSV");

    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/transition_summary.csv");
    out << "# config_digest=" << digest << "\n";
    out << "file,seed,condition_id,transition_t,drop_ratio\n";
    SvgPlot overlay("residual traces", "t", "residual norm");
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open trace file '" + path + "'");
        const auto traces = read_trace_csv(in);
        for (const auto& trace : traces) {
            const TransitionPoint tp = detect_transition_point(trace, r_min);
            out << path << ',' << trace.seed << ',' << trace.condition_id << ',';
            if (tp.timestep) out << *tp.timestep;
            out << ',' << csv_double(tp.drop_ratio) << "\n";
            overlay.add_line(std::vector<double>(trace.timesteps.begin(), trace.timesteps.end()),
                             trace.residual_norms,
                             "seed " + std::to_string(trace.seed));
        }
    }
    if (args.format == "svg") {
        std::ofstream svg(out_dir + "/transition_overlay.svg");
        svg << "<!-- config_digest=" << digest << " -->\n" << overlay.render();
    }
    std::cout << "wrote " << out_dir << "/transition_summary.csv\n";
    return 0;
}

int cmd_report(const CommonArgs& args, std::string in_dir) {
    ExperimentConfig cfg = load(args);
    if (in_dir.empty()) in_dir = cfg.out_dir;
    const std::string metrics_path = in_dir + "/metrics.csv";
    std::ifstream in(metrics_path);
    if (!in) throw ConfigError("cannot open '" + metrics_path + "' (run `sweep` first)");

    struct MetricRow {
        std::string run_id;
        double hit_rate, alignment, diversity, transition, jsd;
    };
    std::vector<MetricRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto cols = split_csv_line(line);
        if (cols.size() < 9) throw ConfigError("malformed metrics.csv row");
        rows.push_back({cols[0], std::stod(cols[4]), std::stod(cols[5]), std::stod(cols[6]),
                        std::stod(cols[7]), std::stod(cols[8])});
    }

    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream out(cfg.out_dir + "/report.txt");
        out << "# config_digest=" << cfg.digest << "\n";
        out << "experiment report (" << rows.size() << " sweep points)\n\n";
        bool monotone = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            out << r.run_id << ": hit_rate=" << csv_double(r.hit_rate)
                << " alignment=" << csv_double(r.alignment)
                << " diversity=" << csv_double(r.diversity)
                << " median_transition=" << csv_double(r.transition)
                << " jsd=" << csv_double(r.jsd) << "\n";
            if (i > 0 && r.transition < rows[i - 1].transition) monotone = false;
        }
        out << "\ntransitions monotone-earlier across sweep: " << (monotone ? "yes" : "no")
            << "\n";
    }
    if (args.format == "svg") {
        SvgPlot scatter("hit rate vs alignment", "duplicate hit rate", "alignment");
        std::vector<double> xs, ys;
        for (const auto& r : rows) {
            xs.push_back(r.hit_rate);
            ys.push_back(r.alignment);
        }
        scatter.add_scatter(xs, ys, "sweep points");
        std::ofstream svg(cfg.out_dir + "/report_scatter.svg");
        svg << "<!-- config_digest=" << cfg.digest << " -->\n" << scatter.render();
    }
    std::cout << "wrote " << cfg.out_dir << "/report.txt\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"basinlab: initial-noise adjustment studies on synthetic diffusion worlds"};
    app.require_subcommand(1);

    CommonArgs world_args, train_args, trace_args, bw_args, ps_args, sweep_args, analyze_args,
        report_args;
    std::vector<std::string> analyze_inputs;
    std::string report_in;

    auto* world = app.add_subcommand("world", "world utilities");
    world->require_subcommand(1);
    auto* world_gen = world->add_subcommand("gen", "generate and export a dataset");
    add_common(world_gen, world_args);

    auto* train = app.add_subcommand("train", "train the MLP backend and save it");
    add_common(train, train_args);

    auto* trace = app.add_subcommand("trace", "record an unguided residual trace");
    add_common(trace, trace_args);

    auto* mitigate = app.add_subcommand("mitigate", "run a mitigation strategy");
    mitigate->require_subcommand(1);
    auto* bw = mitigate->add_subcommand("batchwise", "sharpness-based batch adjustment");
    add_common(bw, bw_args);
    auto* ps = mitigate->add_subcommand("persample", "gradient-based per-sample adjustment");
    add_common(ps, ps_args);

    auto* sweep = app.add_subcommand("sweep", "run the configured sweep end to end");
    add_common(sweep, sweep_args);

    auto* analyze = app.add_subcommand("analyze", "detect transition points in trace CSVs");
    add_common(analyze, analyze_args, /*config_required=*/false);
    analyze->add_option("--in,input", analyze_inputs, "trace CSV files");

    auto* report = app.add_subcommand("report", "summarize sweep outputs");
    add_common(report, report_args);
    report->add_option("--in", report_in, "directory holding runs.csv/metrics.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (world_gen->parsed()) return cmd_world_gen(world_args);
        if (train->parsed()) return cmd_train(train_args);
        if (trace->parsed()) return cmd_trace(trace_args);
        if (bw->parsed()) return cmd_mitigate(bw_args, MitigationStrategy::batchwise);
        if (ps->parsed()) return cmd_mitigate(ps_args, MitigationStrategy::persample);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (analyze->parsed()) return cmd_analyze(analyze_args, analyze_inputs);
        if (report->parsed()) return cmd_report(report_args, report_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
