#include "basinlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "basinlab/csv.hpp"
#include "basinlab/errors.hpp"

namespace basinlab {

double TomlValue::as_real() const {
    if (kind == Kind::real) return r;
    if (kind == Kind::integer) return static_cast<double>(i);
    throw ConfigError("expected a number");
}

std::int64_t TomlValue::as_int() const {
    if (kind == Kind::integer) return i;
    throw ConfigError("expected an integer");
}

std::vector<double> TomlValue::as_real_array() const {
    if (kind != Kind::array) throw ConfigError("expected an array");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) out.push_back(v.as_real());
    return out;
}

namespace {

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() {
        const char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }
    void skip_ws_inline() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    }
};

TomlValue parse_value(Cursor& c);
bool peek_is_space(const Cursor& c);

TomlValue parse_array(Cursor& c) {
    TomlValue v;
    v.kind = TomlValue::Kind::array;
    c.take();  // '['
    while (true) {
        // arrays may span lines
        while (!c.eof() && (peek_is_space(c) || c.peek() == '\n' || c.peek() == '#')) {
            if (c.peek() == '#')
                while (!c.eof() && c.peek() != '\n') c.take();
            else
                c.take();
        }
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            break;
        }
        v.arr.push_back(parse_value(c));
        while (!c.eof() && (peek_is_space(c) || c.peek() == '\n')) c.take();
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ',') {
            c.take();
        } else if (c.peek() != ']') {
            c.fail("expected ',' or ']' in array");
        }
    }
    return v;
}

bool peek_is_space(const Cursor& c) { return c.peek() == ' ' || c.peek() == '\t'; }

TomlValue parse_value(Cursor& c) {
    c.skip_ws_inline();
    if (c.eof()) c.fail("expected a value");
    const char first = c.peek();
    TomlValue v;
    if (first == '[') return parse_array(c);
    if (first == '"') {
        c.take();
        v.kind = TomlValue::Kind::string;
        while (!c.eof() && c.peek() != '"') v.s.push_back(c.take());
        if (c.eof()) c.fail("unterminated string");
        c.take();
        return v;
    }
    std::string token;
    while (!c.eof() && c.peek() != '\n' && c.peek() != ',' && c.peek() != ']' &&
           c.peek() != '#' && !peek_is_space(c))
        token.push_back(c.take());
    if (token == "true" || token == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.b = (token == "true");
        return v;
    }
    const bool looks_real = token.find_first_of(".eE") != std::string::npos ||
                            token == "inf" || token == "-inf" || token == "nan";
    try {
        if (!looks_real) {
            v.kind = TomlValue::Kind::integer;
            std::size_t used = 0;
            v.i = std::stoll(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            return v;
        }
    } catch (const std::exception&) {
        // fall through to real parsing
    }
    try {
        v.kind = TomlValue::Kind::real;
        std::size_t used = 0;
        v.r = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        c.fail("cannot parse value '" + token + "'");
    }
}

}  // namespace

TomlFile TomlFile::parse(const std::string& text) {
    TomlFile file;
    file.text_ = text;
    Cursor c{text};
    std::string current;
    file.order_.push_back("");
    file.tables_[""] = {};
    while (!c.eof()) {
        c.skip_ws_inline();
        if (c.eof()) break;
        const char first = c.peek();
        if (first == '\n') {
            c.take();
            continue;
        }
        if (first == '#') {
            while (!c.eof() && c.peek() != '\n') c.take();
            continue;
        }
        if (first == '[') {
            c.take();
            std::string name;
            while (!c.eof() && c.peek() != ']' && c.peek() != '\n') name.push_back(c.take());
            if (c.eof() || c.peek() != ']') c.fail("unterminated section header");
            c.take();
            current = name;
            if (!file.tables_.count(current)) {
                file.order_.push_back(current);
                file.tables_[current] = {};
            }
            continue;
        }
        std::string key;
        while (!c.eof() && c.peek() != '=' && c.peek() != '\n') key.push_back(c.take());
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        if (c.eof() || c.peek() != '=') c.fail("expected 'key = value'");
        c.take();  // '='
        TomlValue value = parse_value(c);
        c.skip_ws_inline();
        if (!c.eof() && c.peek() == '#')
            while (!c.eof() && c.peek() != '\n') c.take();
        if (!c.eof() && c.peek() != '\n') c.fail("trailing characters after value for '" + key + "'");
        if (file.tables_[current].count(key))
            c.fail("duplicate key '" + key + "' in section [" + current + "]");
        file.tables_[current][key] = std::move(value);
    }
    return file;
}

TomlFile TomlFile::parse_file(const std::string& path) { return parse(read_file(path)); }

bool TomlFile::has(const std::string& section) const { return tables_.count(section) > 0; }

const TomlTable& TomlFile::section(const std::string& name) const {
    const auto it = tables_.find(name);
    if (it == tables_.end()) throw ConfigError("missing config section [" + name + "]");
    return it->second;
}

const TomlTable* TomlFile::find(const std::string& name) const {
    const auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
}

std::vector<std::string> TomlFile::subsections(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string p = prefix + ".";
    for (const auto& name : order_)
        if (name.size() > p.size() && name.compare(0, p.size(), p) == 0)
            out.push_back(name.substr(p.size()));
    return out;
}

double get_real(const TomlTable& t, const std::string& key, double fallback) {
    const auto it = t.find(key);
    return it == t.end() ? fallback : it->second.as_real();
}

std::int64_t get_int(const TomlTable& t, const std::string& key, std::int64_t fallback) {
    const auto it = t.find(key);
    return it == t.end() ? fallback : it->second.as_int();
}

bool get_bool(const TomlTable& t, const std::string& key, bool fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::boolean)
        throw ConfigError("key '" + key + "' must be true/false");
    return it->second.b;
}

std::string get_string(const TomlTable& t, const std::string& key, const std::string& fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::string)
        throw ConfigError("key '" + key + "' must be a string");
    return it->second.s;
}

double require_real(const TomlTable& t, const std::string& key, const std::string& where) {
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("missing key '" + key + "' in [" + where + "]");
    return it->second.as_real();
}

std::string require_string(const TomlTable& t, const std::string& key, const std::string& where) {
    const auto it = t.find(key);
    if (it == t.end() || it->second.kind != TomlValue::Kind::string)
        throw ConfigError("missing string key '" + key + "' in [" + where + "]");
    return it->second.s;
}

namespace {

GmmWorld world_from_config(const TomlFile& file) {
    const TomlTable& w = file.section("world");
    const std::string preset = get_string(w, "preset", file.subsections("world.condition").empty()
                                                           ? "ring"
                                                           : "explicit");
    if (preset == "ring") {
        return ring_world(static_cast<int>(get_int(w, "conditions", 4)),
                          get_real(w, "radius", 2.5), get_real(w, "sigma", 0.35),
                          get_real(w, "mem_sigma", 0.015), get_real(w, "mem_weight", 0.85),
                          get_real(w, "mem_broad_sigma", 0.45));
    }
    if (preset != "explicit")
        throw ConfigError("unknown world preset '" + preset + "'");

    const int d = static_cast<int>(get_int(w, "d", 2));
    std::vector<Condition> conditions;
    for (const auto& id : file.subsections("world.condition")) {
        const TomlTable& ct = file.section("world.condition." + id);
        Condition cond;
        cond.id = id;
        cond.memorized = get_bool(ct, "memorized", false);
        const auto it = ct.find("components");
        if (it == ct.end() || it->second.kind != TomlValue::Kind::array)
            throw ConfigError("condition '" + id + "' needs a components array");
        for (const auto& row : it->second.arr) {
            const auto vals = row.as_real_array();
            if (static_cast<int>(vals.size()) != d + 2)
                throw ConfigError("condition '" + id +
                                  "': each component row is [weight, mean_1..mean_d, sigma]");
            GmmComponent comp;
            comp.weight = vals.front();
            comp.mean.assign(vals.begin() + 1, vals.end() - 1);
            comp.sigma = vals.back();
            cond.components.push_back(std::move(comp));
        }
        conditions.push_back(std::move(cond));
    }
    std::vector<double> prior;
    if (const auto it = w.find("prior"); it != w.end()) prior = it->second.as_real_array();
    MemorizedCriteria criteria;
    criteria.sigma_max = get_real(w, "mem_sigma_max", criteria.sigma_max);
    criteria.weight_min = get_real(w, "mem_weight_min", criteria.weight_min);
    return build_gmm_world(d, std::move(conditions), std::move(prior), criteria);
}

SweepAxis axis_from_string(const std::string& s) {
    if (s == "none") return SweepAxis::none;
    if (s == "gamma_tilde") return SweepAxis::gamma_tilde;
    if (s == "l_target") return SweepAxis::l_target;
    if (s == "tau") return SweepAxis::tau;
    if (s == "weight_decay") return SweepAxis::weight_decay;
    throw ConfigError("unknown sweep axis '" + s + "'");
}

MitigationStrategy strategy_from_string(const std::string& s) {
    if (s == "none") return MitigationStrategy::none;
    if (s == "static_tau") return MitigationStrategy::static_tau;
    if (s == "batchwise") return MitigationStrategy::batchwise;
    if (s == "persample") return MitigationStrategy::persample;
    throw ConfigError("unknown mitigation strategy '" + s + "'");
}

}  // namespace

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::none: return "none";
        case SweepAxis::gamma_tilde: return "gamma_tilde";
        case SweepAxis::l_target: return "l_target";
        case SweepAxis::tau: return "tau";
        case SweepAxis::weight_decay: return "weight_decay";
    }
    return "?";
}

const char* to_string(MitigationStrategy strategy) {
    switch (strategy) {
        case MitigationStrategy::none: return "none";
        case MitigationStrategy::static_tau: return "static_tau";
        case MitigationStrategy::batchwise: return "batchwise";
        case MitigationStrategy::persample: return "persample";
    }
    return "?";
}

double ExperimentConfig::resolved_eps_mem() const {
    if (eps_mem > 0.0) return eps_mem;
    const int mi = world.memorized_index();
    // no memorized condition means no duplicate targets; the radius is moot
    if (mi < 0) return 0.0;
    return 3.0 * world.conditions[static_cast<std::size_t>(mi)].dominant().sigma;
}

int ExperimentConfig::condition_index() const {
    const int idx = world.index_of(condition);
    if (idx < 0) throw ConfigError("run condition '" + condition + "' not present in the world");
    return idx;
}

ExperimentConfig parse_config(const std::string& text) {
    const TomlFile file = TomlFile::parse(text);
    ExperimentConfig cfg;
    cfg.digest = fnv1a_hex(text);
    cfg.world = world_from_config(file);

    if (const auto* s = file.find("schedule")) {
        const std::string kind = get_string(*s, "kind", "linear");
        if (kind != "linear") throw ConfigError("only the linear schedule is built in");
        cfg.schedule.T = static_cast<int>(get_int(*s, "T", cfg.schedule.T));
        cfg.schedule.beta_start = get_real(*s, "beta_start", cfg.schedule.beta_start);
        cfg.schedule.beta_end = get_real(*s, "beta_end", cfg.schedule.beta_end);
    }

    if (const auto* b = file.find("backend")) {
        const std::string kind = get_string(*b, "kind", "analytic");
        if (kind == "analytic") {
            cfg.backend.kind = BackendKind::analytic;
        } else if (kind == "trained") {
            cfg.backend.kind = BackendKind::trained;
        } else {
            throw ConfigError("backend kind must be 'analytic' or 'trained'");
        }
        cfg.backend.train.steps = static_cast<int>(get_int(*b, "steps", cfg.backend.train.steps));
        cfg.backend.train.batch = static_cast<int>(get_int(*b, "batch", cfg.backend.train.batch));
        cfg.backend.train.lr = get_real(*b, "lr", cfg.backend.train.lr);
        cfg.backend.train.cond_dropout =
            get_real(*b, "cond_dropout", cfg.backend.train.cond_dropout);
        cfg.backend.train.holdout =
            static_cast<int>(get_int(*b, "holdout", cfg.backend.train.holdout));
        cfg.backend.train.seed =
            static_cast<std::uint64_t>(get_int(*b, "train_seed", 1));
        cfg.backend.arch.hidden = static_cast<int>(get_int(*b, "hidden", cfg.backend.arch.hidden));
        cfg.backend.arch.hidden_layers =
            static_cast<int>(get_int(*b, "hidden_layers", cfg.backend.arch.hidden_layers));
        cfg.backend.arch.time_features =
            static_cast<int>(get_int(*b, "time_features", cfg.backend.arch.time_features));
        cfg.backend.arch.embed_dim =
            static_cast<int>(get_int(*b, "embed_dim", cfg.backend.arch.embed_dim));
        cfg.backend.n_per_condition =
            static_cast<int>(get_int(*b, "n_per_condition", cfg.backend.n_per_condition));
        cfg.backend.duplication_factor =
            static_cast<int>(get_int(*b, "duplication_factor", cfg.backend.duplication_factor));
        cfg.backend.dataset_seed = static_cast<std::uint64_t>(get_int(*b, "dataset_seed", 1));
        cfg.backend.model_path = get_string(*b, "model_path", "");
    }

    if (const auto* g = file.find("guidance")) cfg.w_cfg = get_real(*g, "w_cfg", cfg.w_cfg);
    if (cfg.w_cfg < 0.0) throw ConfigError("w_cfg must be >= 0");

    if (const auto* m = file.find("mitigation")) {
        cfg.mitigation.strategy = strategy_from_string(get_string(*m, "strategy", "none"));
        auto& bw = cfg.mitigation.batchwise;
        bw.gamma_tilde = get_real(*m, "gamma_tilde", bw.gamma_tilde);
        bw.m_steps = static_cast<int>(get_int(*m, "m_steps", bw.m_steps));
        bw.tau = static_cast<int>(get_int(*m, "tau", bw.tau));
        const double rho_scale = get_real(*m, "rho_scale", 0.5);
        bw.rho = get_real(*m, "rho", rho_scale * std::sqrt(static_cast<double>(cfg.world.d)));
        auto& ps = cfg.mitigation.persample;
        ps.l_target = get_real(*m, "l_target", ps.l_target);
        ps.learning_rate = get_real(*m, "learning_rate", ps.learning_rate);
        ps.weight_decay = get_real(*m, "weight_decay", ps.weight_decay);
        ps.max_iters = static_cast<int>(get_int(*m, "max_iters", ps.max_iters));

        const auto strat = cfg.mitigation.strategy;
        if ((strat == MitigationStrategy::static_tau || strat == MitigationStrategy::batchwise) &&
            (bw.tau < 0 || bw.tau > cfg.schedule.T))
            throw ConfigError("tau must lie in [0, T] for the chosen strategy");
        if (strat == MitigationStrategy::batchwise &&
            !(bw.gamma_tilde >= 0.0 && bw.rho > 0.0 && bw.m_steps >= 0))
            throw ConfigError("batchwise strategy needs gamma_tilde >= 0, rho > 0, m_steps >= 0");
        if (strat == MitigationStrategy::persample &&
            !(ps.l_target > 0.0 && ps.max_iters >= 1))
            throw ConfigError("persample strategy needs l_target > 0 and max_iters >= 1");
    } else {
        cfg.mitigation.batchwise.rho = 0.5 * std::sqrt(static_cast<double>(cfg.world.d));
    }

    if (const auto* sw = file.find("sweep")) {
        cfg.sweep.axis = axis_from_string(get_string(*sw, "axis", "none"));
        if (const auto it = sw->find("values"); it != sw->end())
            cfg.sweep.values = it->second.as_real_array();
        if (cfg.sweep.axis != SweepAxis::none && cfg.sweep.values.empty())
            throw ConfigError("sweep axis set but no values given");
    }

    const TomlTable& run = file.section("run");
    if (const auto it = run.find("seeds"); it != run.end()) {
        if (it->second.kind != TomlValue::Kind::array)
            throw ConfigError("run.seeds must be an array");
        for (const auto& v : it->second.arr)
            cfg.seeds.push_back(static_cast<std::uint64_t>(v.as_int()));
    }
    if (const auto it = run.find("seed_range"); it != run.end()) {
        const auto range = it->second.as_real_array();
        if (range.size() != 2 || range[0] > range[1])
            throw ConfigError("run.seed_range must be [first, last]");
        for (std::int64_t s = static_cast<std::int64_t>(range[0]);
             s <= static_cast<std::int64_t>(range[1]); ++s)
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (cfg.seeds.empty()) throw ConfigError("run.seeds must be a nonempty array");
    {
        auto sorted = cfg.seeds;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("run.seeds must be distinct");
    }
    const int mi = cfg.world.memorized_index();
    cfg.condition = get_string(run, "condition",
                               mi >= 0 ? cfg.world.conditions[static_cast<std::size_t>(mi)].id
                                       : cfg.world.conditions.front().id);
    cfg.out_dir = get_string(run, "out_dir", cfg.out_dir);
    cfg.eps_mem = get_real(run, "eps_mem", 0.0);
    cfg.save_states = get_bool(run, "save_states", false);
    cfg.no_cfg_trace = get_bool(run, "no_cfg_trace", cfg.sweep.axis == SweepAxis::gamma_tilde);
    cfg.r_min = get_real(run, "r_min", 2.0);
    cfg.jsd_bins = static_cast<int>(get_int(run, "jsd_bins", 64));

    cfg.condition_index();  // validates
    return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace basinlab
