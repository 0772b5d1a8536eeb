#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "basinlab/analysis.hpp"
#include "basinlab/config.hpp"
#include "basinlab/denoiser.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/experiment.hpp"
#include "basinlab/mitigation.hpp"
#include "basinlab/mlp.hpp"
#include "basinlab/rng.hpp"
#include "basinlab/sampler.hpp"
#include "basinlab/schedule.hpp"
#include "basinlab/world.hpp"

namespace py = pybind11;
using namespace basinlab;

namespace {

GuidancePolicy policy_from(const std::string& kind, double w_cfg, int tau) {
    if (kind == "none") return GuidancePolicy::none();
    if (kind == "constant") return GuidancePolicy::constant(w_cfg);
    if (kind == "deferred") return GuidancePolicy::deferred(w_cfg, tau);
    throw ConfigError("policy kind must be none|constant|deferred");
}

}  // namespace

PYBIND11_MODULE(_basinlab, m) {
    m.doc() = "Initial-noise adjustment laboratory for conditional diffusion worlds";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    m.attr("NULL_COND") = kNullCond;

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_static("linear", &NoiseSchedule::linear, py::arg("T"), py::arg("beta_start"),
                    py::arg("beta_end"))
        .def_static("from_betas", &NoiseSchedule::from_betas, py::arg("betas"))
        .def_property_readonly("T", &NoiseSchedule::T)
        .def_readonly("beta", &NoiseSchedule::beta)
        .def_readonly("alpha", &NoiseSchedule::alpha)
        .def_readonly("alpha_bar", &NoiseSchedule::alpha_bar)
        .def("beta_at", &NoiseSchedule::beta_at, py::arg("t"))
        .def("alpha_at", &NoiseSchedule::alpha_at, py::arg("t"))
        .def("alpha_bar_at", &NoiseSchedule::alpha_bar_at, py::arg("t"));

    m.def("forward_noise", &forward_noise, py::arg("x0"), py::arg("t"), py::arg("eps"),
          py::arg("schedule"));

    py::class_<GmmComponent>(m, "GmmComponent")
        .def(py::init([](double weight, Vec mean, double sigma) {
                 return GmmComponent{weight, std::move(mean), sigma};
             }),
             py::arg("weight"), py::arg("mean"), py::arg("sigma"))
        .def_readonly("weight", &GmmComponent::weight)
        .def_readonly("mean", &GmmComponent::mean)
        .def_readonly("sigma", &GmmComponent::sigma);

    py::class_<Condition>(m, "Condition")
        .def(py::init([](std::string id, std::vector<GmmComponent> components, bool memorized) {
                 Condition c;
                 c.id = std::move(id);
                 c.components = std::move(components);
                 c.memorized = memorized;
                 return c;
             }),
             py::arg("id"), py::arg("components"), py::arg("memorized") = false)
        .def_readonly("id", &Condition::id)
        .def_readonly("components", &Condition::components)
        .def_readonly("memorized", &Condition::memorized);

    py::class_<GmmWorld>(m, "GmmWorld")
        .def_readonly("d", &GmmWorld::d)
        .def_readonly("conditions", &GmmWorld::conditions)
        .def_readonly("prior", &GmmWorld::prior)
        .def("index_of", &GmmWorld::index_of, py::arg("id"))
        .def("memorized_index", &GmmWorld::memorized_index)
        .def("cond_log_density", &GmmWorld::cond_log_density, py::arg("x"), py::arg("cond_index"))
        .def("null_log_density", &GmmWorld::null_log_density, py::arg("x"))
        .def("duplicate_targets", &GmmWorld::duplicate_targets);

    py::class_<MemorizedCriteria>(m, "MemorizedCriteria")
        .def(py::init<>())
        .def_readwrite("sigma_max", &MemorizedCriteria::sigma_max)
        .def_readwrite("weight_min", &MemorizedCriteria::weight_min);
    m.def("build_gmm_world", &build_gmm_world, py::arg("d"), py::arg("conditions"),
          py::arg("prior") = std::vector<double>{}, py::arg("criteria") = MemorizedCriteria{});
    m.def("ring_world", &ring_world, py::arg("n_conditions") = 4, py::arg("radius") = 2.5,
          py::arg("sigma") = 0.35, py::arg("mem_sigma") = 0.015, py::arg("mem_weight") = 0.85,
          py::arg("mem_broad_sigma") = 0.45);

    py::class_<DatasetPoint>(m, "DatasetPoint")
        .def_readonly("x0", &DatasetPoint::x0)
        .def_readonly("cond_index", &DatasetPoint::cond_index);
    py::class_<Dataset>(m, "Dataset")
        .def_readonly("points", &Dataset::points)
        .def_readonly("duplicate_index", &Dataset::duplicate_index);
    m.def("sample_dataset", &sample_dataset, py::arg("world"), py::arg("n_per_condition"),
          py::arg("duplication_factor"), py::arg("seed"));

    py::class_<Denoiser>(m, "Denoiser")
        .def_property_readonly("dim", &Denoiser::dim)
        .def_property_readonly("num_timesteps", &Denoiser::num_timesteps)
        .def("eval", &Denoiser::eval, py::arg("x"), py::arg("t"), py::arg("y"))
        .def("residual_norm_grad", &Denoiser::residual_norm_grad, py::arg("x"), py::arg("t"),
             py::arg("y"));

    py::class_<ConditionalResidual>(m, "ConditionalResidual")
        .def_readonly("value", &ConditionalResidual::value)
        .def_readonly("norm", &ConditionalResidual::norm);
    m.def("cond_residual", &cond_residual, py::arg("denoiser"), py::arg("x"), py::arg("t"),
          py::arg("y"));

    py::class_<GmmDenoiser, Denoiser>(m, "GmmDenoiser")
        .def(py::init<GmmWorld, NoiseSchedule>(), py::arg("world"), py::arg("schedule"))
        .def("marginal_log_density", &GmmDenoiser::marginal_log_density, py::arg("x"),
             py::arg("t"), py::arg("y"));

    py::class_<MlpSpec>(m, "MlpSpec")
        .def(py::init<>())
        .def_readwrite("d", &MlpSpec::d)
        .def_readwrite("hidden", &MlpSpec::hidden)
        .def_readwrite("hidden_layers", &MlpSpec::hidden_layers)
        .def_readwrite("time_features", &MlpSpec::time_features)
        .def_readwrite("embed_dim", &MlpSpec::embed_dim)
        .def_readwrite("n_conditions", &MlpSpec::n_conditions)
        .def_readwrite("T", &MlpSpec::T);

    py::class_<MlpDenoiser, Denoiser>(m, "MlpDenoiser")
        .def_static("init", &MlpDenoiser::init, py::arg("spec"), py::arg("seed"))
        .def_static("load_json", &MlpDenoiser::load_json, py::arg("path"))
        .def("save_json", &MlpDenoiser::save_json, py::arg("path"))
        .def_property_readonly("spec", &MlpDenoiser::spec)
        .def_property_readonly(
            "parameters",
            [](const MlpDenoiser& d) { return d.parameters(); });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("cond_dropout", &TrainConfig::cond_dropout)
        .def_readwrite("holdout", &TrainConfig::holdout)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("initial_holdout_loss", &TrainResult::initial_holdout_loss)
        .def_readonly("final_holdout_loss", &TrainResult::final_holdout_loss)
        .def_readonly("loss_history", &TrainResult::loss_history)
        .def_property_readonly("model",
                               [](TrainResult& r) -> MlpDenoiser& { return r.model; },
                               py::return_value_policy::reference_internal);

    m.def("train_mlp", &train_mlp, py::arg("world"), py::arg("dataset"), py::arg("schedule"),
          py::arg("config") = TrainConfig{}, py::arg("arch") = MlpSpec{});

    py::class_<GuidancePolicy>(m, "GuidancePolicy")
        .def_static("none", &GuidancePolicy::none)
        .def_static("constant", &GuidancePolicy::constant, py::arg("w_cfg"))
        .def_static("deferred", &GuidancePolicy::deferred, py::arg("w_cfg"), py::arg("tau"));

    py::class_<TrajectoryTrace>(m, "TrajectoryTrace")
        .def_readonly("timesteps", &TrajectoryTrace::timesteps)
        .def_readonly("residual_norms", &TrajectoryTrace::residual_norms)
        .def_readonly("states", &TrajectoryTrace::states)
        .def_readonly("final_state", &TrajectoryTrace::final_state)
        .def_readonly("seed", &TrajectoryTrace::seed)
        .def_readonly("condition_id", &TrajectoryTrace::condition_id);

    m.def(
        "cfg_noise",
        [](const Denoiser& den, const Vec& x, int t, int y, double w) {
            return cfg_noise(den, x, t, y, w);
        },
        py::arg("denoiser"), py::arg("x"), py::arg("t"), py::arg("y"), py::arg("w_cfg"));
    m.def("reverse_step", &reverse_step, py::arg("x_t"), py::arg("eps"), py::arg("t"),
          py::arg("schedule"));
    m.def(
        "sample",
        [](const Denoiser& den, const std::string& policy, double w_cfg, int tau, Vec x_T, int y,
           const NoiseSchedule& schedule, bool record_states, std::uint64_t seed,
           const std::string& condition_id) {
            SampleOptions opts;
            opts.record_states = record_states;
            opts.seed = seed;
            opts.condition_id = condition_id;
            return sample(den, policy_from(policy, w_cfg, tau), std::move(x_T), y, schedule, opts);
        },
        py::arg("denoiser"), py::arg("policy"), py::arg("w_cfg"), py::arg("tau"), py::arg("x_T"),
        py::arg("y"), py::arg("schedule"), py::arg("record_states") = false, py::arg("seed") = 0,
        py::arg("condition_id") = "");
    m.def(
        "trace_without_cfg",
        [](const Denoiser& den, Vec x_T, int y, const NoiseSchedule& schedule) {
            return trace_without_cfg(den, std::move(x_T), y, schedule);
        },
        py::arg("denoiser"), py::arg("x_T"), py::arg("y"), py::arg("schedule"));

    py::class_<BatchwiseConfig>(m, "BatchwiseConfig")
        .def(py::init<>())
        .def_readwrite("gamma_tilde", &BatchwiseConfig::gamma_tilde)
        .def_readwrite("rho", &BatchwiseConfig::rho)
        .def_readwrite("m_steps", &BatchwiseConfig::m_steps)
        .def_readwrite("tau", &BatchwiseConfig::tau);
    py::class_<PersampleConfig>(m, "PersampleConfig")
        .def(py::init<>())
        .def_readwrite("l_target", &PersampleConfig::l_target)
        .def_readwrite("learning_rate", &PersampleConfig::learning_rate)
        .def_readwrite("weight_decay", &PersampleConfig::weight_decay)
        .def_readwrite("max_iters", &PersampleConfig::max_iters);

    py::class_<Perturbation>(m, "Perturbation")
        .def_readonly("delta", &Perturbation::delta)
        .def_readonly("zero_residual", &Perturbation::zero_residual);
    m.def("sharpness_perturbation", &sharpness_perturbation, py::arg("denoiser"), py::arg("x_T"),
          py::arg("y"), py::arg("rho"));
    m.def(
        "batchwise_adjust",
        [](const Denoiser& den, std::vector<Vec> batch, int y, const BatchwiseConfig& cfg) {
            return batchwise_adjust(den, std::move(batch), y, cfg);
        },
        py::arg("denoiser"), py::arg("batch"), py::arg("y"), py::arg("config"));
    m.def(
        "batchwise_mitigate",
        [](const Denoiser& den, std::vector<Vec> batch, int y, const BatchwiseConfig& cfg,
           double w_cfg, const NoiseSchedule& schedule) {
            return batchwise_mitigate(den, std::move(batch), y, cfg, w_cfg, schedule);
        },
        py::arg("denoiser"), py::arg("batch"), py::arg("y"), py::arg("config"), py::arg("w_cfg"),
        py::arg("schedule"));

    py::class_<PersampleResult>(m, "PersampleResult")
        .def_readonly("x", &PersampleResult::x)
        .def_readonly("iterations", &PersampleResult::iterations);
    m.def(
        "persample_adjust",
        [](const Denoiser& den, Vec x_T, int y, const PersampleConfig& cfg) {
            return persample_adjust(den, std::move(x_T), y, cfg);
        },
        py::arg("denoiser"), py::arg("x_T"), py::arg("y"), py::arg("config"));
    m.def(
        "persample_mitigate",
        [](const Denoiser& den, Vec x_T, int y, const PersampleConfig& cfg, double w_cfg,
           const NoiseSchedule& schedule) {
            return persample_mitigate(den, std::move(x_T), y, cfg, w_cfg, schedule);
        },
        py::arg("denoiser"), py::arg("x_T"), py::arg("y"), py::arg("config"), py::arg("w_cfg"),
        py::arg("schedule"));

    py::class_<TransitionPoint>(m, "TransitionPoint")
        .def_readonly("timestep", &TransitionPoint::timestep)
        .def_readonly("drop_ratio", &TransitionPoint::drop_ratio);
    m.def("detect_transition_point", &detect_transition_point, py::arg("trace"),
          py::arg("r_min") = 2.0);

    py::class_<MetricReport>(m, "MetricReport")
        .def_readonly("duplicate_hit_rate", &MetricReport::duplicate_hit_rate)
        .def_readonly("alignment", &MetricReport::alignment)
        .def_readonly("diversity", &MetricReport::diversity);
    m.def(
        "metric_report",
        [](const std::vector<Vec>& finals, const GmmWorld& world, int y, double eps_mem) {
            return metric_report(finals, world, y, eps_mem);
        },
        py::arg("final_states"), py::arg("world"), py::arg("y"), py::arg("eps_mem"));

    m.def("chi_log_density", &chi_log_density, py::arg("r"), py::arg("d"));

    py::class_<RegularizedTerms>(m, "RegularizedTerms")
        .def_readonly("residual_norm", &RegularizedTerms::residual_norm)
        .def_readonly("decay_term", &RegularizedTerms::decay_term)
        .def_readonly("log_radius_term", &RegularizedTerms::log_radius_term);
    m.def("regularized_objective_terms", &regularized_objective_terms, py::arg("x"),
          py::arg("denoiser"), py::arg("y"), py::arg("w"));

    py::class_<NormDistributionReport>(m, "NormDistributionReport")
        .def_readonly("bin_edges", &NormDistributionReport::bin_edges)
        .def_readonly("adjusted_mass", &NormDistributionReport::adjusted_mass)
        .def_readonly("reference_mass", &NormDistributionReport::reference_mass)
        .def_readonly("jsd", &NormDistributionReport::jsd);
    m.def(
        "norm_distribution_jsd",
        [](const std::vector<double>& adjusted, const std::vector<double>& reference, int bins) {
            return norm_distribution_jsd(adjusted, reference, bins);
        },
        py::arg("adjusted"), py::arg("reference"), py::arg("bins") = 64);

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("gauss", &Rng::gauss)
        .def("uniform01", &Rng::uniform01)
        .def("gauss_vec", &Rng::gauss_vec, py::arg("n"));
    m.def("mix_seed", &mix_seed, py::arg("base"), py::arg("stream"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readwrite("out_dir", &ExperimentConfig::out_dir)
        .def_readonly("digest", &ExperimentConfig::digest)
        .def_readonly("condition", &ExperimentConfig::condition)
        .def_readonly("seeds", &ExperimentConfig::seeds);
    m.def("load_config", &load_config, py::arg("path"));

    py::class_<RunRow>(m, "RunRow")
        .def_readonly("seed", &RunRow::seed)
        .def_readonly("sweep_value", &RunRow::sweep_value)
        .def_readonly("hit", &RunRow::hit)
        .def_readonly("alignment", &RunRow::alignment)
        .def_readonly("transition_t", &RunRow::transition_t)
        .def_readonly("evals", &RunRow::evals)
        .def_readonly("error", &RunRow::error);
    py::class_<SweepSummary>(m, "SweepSummary")
        .def_readonly("sweep_value", &SweepSummary::sweep_value)
        .def_readonly("metrics", &SweepSummary::metrics)
        .def_readonly("median_transition", &SweepSummary::median_transition)
        .def_readonly("jsd", &SweepSummary::jsd);
    py::class_<ExperimentReport>(m, "ExperimentReport")
        .def_readonly("rows", &ExperimentReport::rows)
        .def_readonly("summaries", &ExperimentReport::summaries)
        .def_readonly("wall_seconds", &ExperimentReport::wall_seconds)
        .def_readonly("config_digest", &ExperimentReport::config_digest);
    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg, bool write_outputs) {
            return run_experiment(cfg, write_outputs);
        },
        py::arg("config"), py::arg("write_outputs") = true);
    m.def(
        "run_experiment_file",
        [](const std::string& path, const std::string& out_dir) {
            ExperimentConfig cfg = load_config(path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            return run_experiment(cfg, true);
        },
        py::arg("config_path"), py::arg("out_dir") = "");
}
