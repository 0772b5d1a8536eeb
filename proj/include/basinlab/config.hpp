#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "basinlab/mitigation.hpp"
#include "basinlab/mlp.hpp"
#include "basinlab/schedule.hpp"
#include "basinlab/world.hpp"

namespace basinlab {

/// Minimal declarative key-table config format: [section] headers (dotted
/// names allowed), key = value lines, '#' comments. Values: booleans,
/// integers, reals, quoted strings, and (nested) arrays.
struct TomlValue {
    enum class Kind { boolean, integer, real, string, array };

    Kind kind = Kind::boolean;
    bool b = false;
    std::int64_t i = 0;
    double r = 0.0;
    std::string s;
    std::vector<TomlValue> arr;

    double as_real() const;  // integers promote
    std::int64_t as_int() const;
    std::vector<double> as_real_array() const;
};

using TomlTable = std::map<std::string, TomlValue>;

class TomlFile {
public:
    static TomlFile parse(const std::string& text);
    static TomlFile parse_file(const std::string& path);

    bool has(const std::string& section) const;
    const TomlTable& section(const std::string& name) const;  // throws when absent
    const TomlTable* find(const std::string& name) const;

    /// Sections whose name starts with `prefix.`, in file order; returns the
    /// remainder after the prefix.
    std::vector<std::string> subsections(const std::string& prefix) const;

    const std::string& text() const { return text_; }

private:
    std::string text_;
    std::vector<std::string> order_;
    std::map<std::string, TomlTable> tables_;
};

// typed getters with section.key error messages
double get_real(const TomlTable& t, const std::string& key, double fallback);
std::int64_t get_int(const TomlTable& t, const std::string& key, std::int64_t fallback);
bool get_bool(const TomlTable& t, const std::string& key, bool fallback);
std::string get_string(const TomlTable& t, const std::string& key, const std::string& fallback);
double require_real(const TomlTable& t, const std::string& key, const std::string& where);
std::string require_string(const TomlTable& t, const std::string& key, const std::string& where);

enum class BackendKind { analytic, trained };
enum class MitigationStrategy { none, static_tau, batchwise, persample };
enum class SweepAxis { none, gamma_tilde, l_target, tau, weight_decay };

struct ScheduleSpec {
    int T = 25;
    double beta_start = 0.002;
    double beta_end = 0.182;
};

struct BackendSpec {
    BackendKind kind = BackendKind::analytic;
    TrainConfig train;
    MlpSpec arch;
    int n_per_condition = 400;
    int duplication_factor = 400;
    std::uint64_t dataset_seed = 1;
    std::string model_path;  // when set, load instead of training
};

struct MitigationSpec {
    MitigationStrategy strategy = MitigationStrategy::none;
    BatchwiseConfig batchwise;
    PersampleConfig persample;
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::none;
    std::vector<double> values;
};

/// Everything a reproducible end-to-end study needs. Loaded from a single
/// config file; the digest of the file's bytes is embedded in every output.
struct ExperimentConfig {
    GmmWorld world;
    ScheduleSpec schedule;
    BackendSpec backend;
    double w_cfg = 7.0;
    MitigationSpec mitigation;
    SweepSpec sweep;
    std::vector<std::uint64_t> seeds;
    std::string condition;  // sampled condition id
    std::string out_dir = "out";
    double eps_mem = 0.0;  // <= 0: use 3x the memorized component's sigma
    bool save_states = false;
    bool no_cfg_trace = false;  // additionally record an unguided trace per run
    double r_min = 2.0;
    int jsd_bins = 64;
    std::string digest;  // provenance stamp

    double resolved_eps_mem() const;
    int condition_index() const;  // validated at load time
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

const char* to_string(SweepAxis axis);
const char* to_string(MitigationStrategy strategy);

}  // namespace basinlab
