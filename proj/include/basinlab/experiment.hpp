#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "basinlab/analysis.hpp"
#include "basinlab/config.hpp"
#include "basinlab/denoiser.hpp"
#include "basinlab/mlp.hpp"
#include "basinlab/sampler.hpp"

namespace basinlab {

/// One (sweep value, seed) run. Rows are recorded even when the run fails;
/// `error` holds the diagnostic and the numeric fields stay at defaults.
struct RunRow {
    std::size_t run_index = 0;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    Vec x_raw;
    Vec x_adjusted;
    Vec final_state;
    double residual_raw = 0.0;       // ||residual(x_T, T, y)||
    double residual_adjusted = 0.0;  // ||residual(x~_T, T, y)||
    int iterations = 0;              // per-sample loop count (batchwise: m_steps)
    std::optional<int> transition_t;
    double drop_ratio = 0.0;
    bool hit = false;
    double alignment = 0.0;
    std::uint64_t evals = 0;
    std::uint64_t grads = 0;
    std::string error;
    TrajectoryTrace trace;       // the run's sampling trace
    TrajectoryTrace diag_trace;  // unguided diagnostic trace (when enabled)
};

struct SweepSummary {
    double sweep_value = 0.0;
    std::size_t ok_count = 0;
    MetricReport metrics;
    double median_transition = 0.0;
    int absent_count = 0;
    double jsd = 0.0;                    // adjusted vs raw initial-norm distributions
    double mean_residual_adjusted = 0.0;
};

struct ExperimentReport {
    std::vector<RunRow> rows;
    std::vector<SweepSummary> summaries;
    TransitionComparison transitions;
    double wall_seconds = 0.0;  // never written into CSVs
    std::string config_digest;
    double train_initial_loss = 0.0;
    double train_final_loss = 0.0;
};

/// Builds or trains the configured backend.
std::unique_ptr<Denoiser> build_backend(const ExperimentConfig& cfg, double* initial_loss = nullptr,
                                        double* final_loss = nullptr);

/// Runs the configured study: every sweep value x seed, with run-level error
/// isolation, and writes all CSV/SVG outputs under cfg.out_dir. Fully
/// deterministic given the config; BASINLAB_THREADS (>1) parallelizes runs
/// without changing a single output byte.
ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

/// Same study against a pre-built backend (used when a trained model is
/// shared across several experiment calls).
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Denoiser& backend,
                                bool write_outputs = true);

/// Dataset export: columns x_1..x_d, condition_id, is_duplicate.
void write_dataset_csv(std::ostream& out, const Dataset& dataset, const GmmWorld& world,
                       std::span<const std::string> header_lines);

/// Worker count from BASINLAB_THREADS (0 or unset means sequential).
int configured_thread_count();

}  // namespace basinlab
