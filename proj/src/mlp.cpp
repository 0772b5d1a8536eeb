#include "basinlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "basinlab/errors.hpp"
#include "basinlab/rng.hpp"

namespace basinlab {

namespace {

// Parameter layout, in order:
//   embedding table   (n_conditions + 1) x embed_dim   (last row = null)
//   layer 0           W [hidden x input_dim], b [hidden]
//   layers 1..L-1     W [hidden x hidden],    b [hidden]
//   head              W [d x hidden],         b [d]
struct Layout {
    std::size_t embed_off, embed_rows;
    std::vector<std::size_t> w_off, b_off;
    std::vector<int> in_dim, out_dim;  // per layer incl. head
    std::size_t total;

    explicit Layout(const MlpSpec& s) {
        embed_off = 0;
        embed_rows = static_cast<std::size_t>(s.n_conditions + 1);
        std::size_t off = embed_rows * static_cast<std::size_t>(s.embed_dim);
        int in = s.input_dim();
        for (int l = 0; l < s.hidden_layers; ++l) {
            w_off.push_back(off);
            off += static_cast<std::size_t>(s.hidden) * static_cast<std::size_t>(in);
            b_off.push_back(off);
            off += static_cast<std::size_t>(s.hidden);
            in_dim.push_back(in);
            out_dim.push_back(s.hidden);
            in = s.hidden;
        }
        w_off.push_back(off);
        off += static_cast<std::size_t>(s.d) * static_cast<std::size_t>(in);
        b_off.push_back(off);
        off += static_cast<std::size_t>(s.d);
        in_dim.push_back(in);
        out_dim.push_back(s.d);
        total = off;
    }
};

void time_features(int t, int T, int count, double* out) {
    // sin/cos pairs at dyadic frequencies. The lowest pair spans a half cycle,
    // so its cosine is monotone over 1..T and the embedding never aliases two
    // timesteps.
    const double two_pi = 6.283185307179586476925286766559;
    const double tn = static_cast<double>(t) / static_cast<double>(T);
    double freq = 0.5;
    for (int i = 0; i < count / 2; ++i) {
        out[2 * i] = std::sin(two_pi * tn * freq);
        out[2 * i + 1] = std::cos(two_pi * tn * freq);
        freq *= 2.0;
    }
}

struct Workspace {
    std::vector<Vec> act;  // act[0] = input, act[l+1] = layer output
};

}  // namespace

std::size_t MlpSpec::param_count() const { return Layout(*this).total; }

struct MlpGradOps {
    const MlpSpec& spec;
    const std::vector<double>& params;
    Layout layout;

    MlpGradOps(const MlpSpec& s, const std::vector<double>& p) : spec(s), params(p), layout(s) {}

    void build_input(const Vec& x, int t, int y, Vec& input) const {
        const int d = spec.d;
        input.resize(static_cast<std::size_t>(spec.input_dim()));
        for (int i = 0; i < d; ++i) input[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
        time_features(t, spec.T, spec.time_features, input.data() + d);
        const std::size_t row = (y == kNullCond) ? static_cast<std::size_t>(spec.n_conditions)
                                                 : static_cast<std::size_t>(y);
        const double* emb = params.data() + layout.embed_off + row * static_cast<std::size_t>(spec.embed_dim);
        for (int i = 0; i < spec.embed_dim; ++i)
            input[static_cast<std::size_t>(d + spec.time_features + i)] = emb[i];
    }

    /// Forward pass; fills ws.act with input and every layer output.
    void forward(const Vec& x, int t, int y, Workspace& ws) const {
        const int L = spec.hidden_layers;
        ws.act.resize(static_cast<std::size_t>(L + 2));
        build_input(x, t, y, ws.act[0]);
        for (int l = 0; l <= L; ++l) {
            const int in = layout.in_dim[static_cast<std::size_t>(l)];
            const int out = layout.out_dim[static_cast<std::size_t>(l)];
            const double* W = params.data() + layout.w_off[static_cast<std::size_t>(l)];
            const double* b = params.data() + layout.b_off[static_cast<std::size_t>(l)];
            const Vec& h = ws.act[static_cast<std::size_t>(l)];
            Vec& a = ws.act[static_cast<std::size_t>(l + 1)];
            a.resize(static_cast<std::size_t>(out));
            for (int i = 0; i < out; ++i) {
                double s = b[i];
                const double* wrow = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(in);
                for (int j = 0; j < in; ++j) s += wrow[j] * h[static_cast<std::size_t>(j)];
                a[static_cast<std::size_t>(i)] = (l < L) ? std::tanh(s) : s;
            }
        }
    }

    /// Vector-Jacobian product: given d(loss)/d(output) in cot, accumulates
    /// parameter gradients into pgrad (when non-null) and returns the gradient
    /// with respect to the full input vector.
    Vec backward(const Workspace& ws, Vec cot, int y, std::vector<double>* pgrad) const {
        const int L = spec.hidden_layers;
        for (int l = L; l >= 0; --l) {
            const int in = layout.in_dim[static_cast<std::size_t>(l)];
            const int out = layout.out_dim[static_cast<std::size_t>(l)];
            const double* W = params.data() + layout.w_off[static_cast<std::size_t>(l)];
            const Vec& h = ws.act[static_cast<std::size_t>(l)];
            const Vec& a = ws.act[static_cast<std::size_t>(l + 1)];
            // tanh layers: fold the activation derivative into the cotangent
            if (l < L)
                for (int i = 0; i < out; ++i)
                    cot[static_cast<std::size_t>(i)] *= 1.0 - a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
            if (pgrad) {
                double* gW = pgrad->data() + layout.w_off[static_cast<std::size_t>(l)];
                double* gb = pgrad->data() + layout.b_off[static_cast<std::size_t>(l)];
                for (int i = 0; i < out; ++i) {
                    gb[i] += cot[static_cast<std::size_t>(i)];
                    double* grow = gW + static_cast<std::size_t>(i) * static_cast<std::size_t>(in);
                    const double c = cot[static_cast<std::size_t>(i)];
                    for (int j = 0; j < in; ++j) grow[j] += c * h[static_cast<std::size_t>(j)];
                }
            }
            Vec next(static_cast<std::size_t>(in), 0.0);
            for (int i = 0; i < out; ++i) {
                const double c = cot[static_cast<std::size_t>(i)];
                const double* wrow = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(in);
                for (int j = 0; j < in; ++j) next[static_cast<std::size_t>(j)] += c * wrow[j];
            }
            cot = std::move(next);
        }
        if (pgrad) {
            const std::size_t row = (y == kNullCond) ? static_cast<std::size_t>(spec.n_conditions)
                                                     : static_cast<std::size_t>(y);
            double* gemb = pgrad->data() + layout.embed_off + row * static_cast<std::size_t>(spec.embed_dim);
            for (int i = 0; i < spec.embed_dim; ++i)
                gemb[i] += cot[static_cast<std::size_t>(spec.d + spec.time_features + i)];
        }
        return cot;  // gradient w.r.t. the full input
    }
};

MlpDenoiser::MlpDenoiser(MlpSpec spec, std::vector<double> params)
    : spec_(spec), params_(std::move(params)) {
    if (spec_.time_features % 2 != 0) throw ConfigError("time_features must be even");
    if (spec_.T < 1 || spec_.d < 1 || spec_.hidden < 1 || spec_.hidden_layers < 1 ||
        spec_.embed_dim < 1 || spec_.n_conditions < 1)
        throw ConfigError("invalid MLP spec");
    if (params_.size() != spec_.param_count())
        throw ConfigError("parameter vector size does not match the spec");
}

MlpDenoiser MlpDenoiser::init(const MlpSpec& spec, std::uint64_t seed) {
    Layout layout(spec);
    std::vector<double> params(layout.total, 0.0);
    Rng rng(mix_seed(seed, 0x3d1b0u));
    for (std::size_t i = 0; i < layout.embed_rows * static_cast<std::size_t>(spec.embed_dim); ++i)
        params[layout.embed_off + i] = 0.5 * rng.gauss();
    for (std::size_t l = 0; l < layout.w_off.size(); ++l) {
        const int in = layout.in_dim[l];
        const int out = layout.out_dim[l];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (int i = 0; i < out * in; ++i)
            params[layout.w_off[l] + static_cast<std::size_t>(i)] = scale * (2.0 * rng.uniform01() - 1.0);
        // biases stay zero
    }
    return MlpDenoiser(spec, std::move(params));
}

Vec MlpDenoiser::eval(const Vec& x, int t, int y) const {
    if (static_cast<int>(x.size()) != spec_.d) throw ConfigError("state dimension mismatch");
    if (t < 1 || t > spec_.T) throw ConfigError("timestep out of range");
    if (y != kNullCond && (y < 0 || y >= spec_.n_conditions))
        throw ConfigError("condition index out of range");
    MlpGradOps ops(spec_, params_);
    Workspace ws;
    ops.forward(x, t, y, ws);
    return ws.act.back();
}

Vec MlpDenoiser::residual_norm_grad(const Vec& x, int t, int y) const {
    if (y == kNullCond) throw ConfigError("residual gradient requires a real condition");
    MlpGradOps ops(spec_, params_);
    Workspace ws_y, ws_null;
    ops.forward(x, t, y, ws_y);
    ops.forward(x, t, kNullCond, ws_null);

    Vec g = ws_y.act.back();
    const Vec& out_null = ws_null.act.back();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= out_null[i];
    const double gnorm = norm2(g);
    if (gnorm == 0.0) throw NumericError("residual is zero; the norm gradient is undefined");
    for (double& v : g) v /= gnorm;

    const Vec gin_y = ops.backward(ws_y, g, y, nullptr);
    const Vec gin_null = ops.backward(ws_null, g, kNullCond, nullptr);
    Vec grad(static_cast<std::size_t>(spec_.d));
    for (int i = 0; i < spec_.d; ++i)
        grad[static_cast<std::size_t>(i)] =
            gin_y[static_cast<std::size_t>(i)] - gin_null[static_cast<std::size_t>(i)];
    return grad;
}

void MlpDenoiser::save_json(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "basinlab-mlp-v1";
    j["d"] = spec_.d;
    j["hidden"] = spec_.hidden;
    j["hidden_layers"] = spec_.hidden_layers;
    j["time_features"] = spec_.time_features;
    j["embed_dim"] = spec_.embed_dim;
    j["n_conditions"] = spec_.n_conditions;
    j["T"] = spec_.T;
    j["params"] = params_;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump();
    out << "\n";
}

MlpDenoiser MlpDenoiser::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != std::string("basinlab-mlp-v1"))
        throw ConfigError("unsupported model format in '" + path + "'");
    MlpSpec spec;
    spec.d = j.at("d").get<int>();
    spec.hidden = j.at("hidden").get<int>();
    spec.hidden_layers = j.at("hidden_layers").get<int>();
    spec.time_features = j.at("time_features").get<int>();
    spec.embed_dim = j.at("embed_dim").get<int>();
    spec.n_conditions = j.at("n_conditions").get<int>();
    spec.T = j.at("T").get<int>();
    return MlpDenoiser(spec, j.at("params").get<std::vector<double>>());
}

namespace {

struct EvalSample {
    Vec x_t;
    int t;
    int y;  // kNullCond for dropped-out pairs
    Vec eps;
};

double batch_loss(const MlpGradOps& ops, const std::vector<EvalSample>& batch,
                  std::vector<double>* pgrad) {
    Workspace ws;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        ops.forward(s.x_t, s.t, s.y, ws);
        const Vec& out = ws.act.back();
        Vec cot(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double diff = out[i] - s.eps[i];
            loss += diff * diff * inv_n;
            cot[i] = 2.0 * diff * inv_n;
        }
        if (pgrad) ops.backward(ws, std::move(cot), s.y, pgrad);
    }
    return loss;
}

std::vector<EvalSample> draw_batch(const Dataset& dataset, const NoiseSchedule& schedule,
                                   double cond_dropout, int n, int d, Rng& rng) {
    std::vector<EvalSample> batch;
    batch.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& p = dataset.points[rng.below(dataset.points.size())];
        EvalSample s;
        s.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.T())));
        s.y = (rng.uniform01() < cond_dropout) ? kNullCond : p.cond_index;
        s.eps = rng.gauss_vec(d);
        s.x_t = forward_noise(p.x0, s.t, s.eps, schedule);
        batch.push_back(std::move(s));
    }
    return batch;
}

}  // namespace

TrainResult train_mlp(const GmmWorld& world, const Dataset& dataset, const NoiseSchedule& schedule,
                      const TrainConfig& config, const MlpSpec& arch) {
    if (dataset.points.empty()) throw ConfigError("training dataset is empty");
    for (const auto& p : dataset.points)
        if (p.cond_index < 0 || p.cond_index >= static_cast<int>(world.conditions.size()))
            throw ConfigError("dataset references a condition missing from the world");

    MlpSpec spec = arch;
    spec.d = world.d;
    spec.n_conditions = static_cast<int>(world.conditions.size());
    spec.T = schedule.T();

    MlpDenoiser model = MlpDenoiser::init(spec, config.seed);
    Rng data_rng(mix_seed(config.seed, 0xda7aULL));
    const auto holdout =
        draw_batch(dataset, schedule, config.cond_dropout, config.holdout, spec.d, data_rng);

    TrainResult result{std::move(model), 0.0, 0.0, {}};
    {
        MlpGradOps ops(result.model.spec(), result.model.parameters());
        result.initial_holdout_loss = batch_loss(ops, holdout, nullptr);
    }

    auto& params = result.model.parameters();
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    result.loss_history.reserve(static_cast<std::size_t>(config.steps));

    for (int step = 1; step <= config.steps; ++step) {
        const auto batch =
            draw_batch(dataset, schedule, config.cond_dropout, config.batch, spec.d, data_rng);
        std::fill(grad.begin(), grad.end(), 0.0);
        MlpGradOps ops(result.model.spec(), params);
        const double loss = batch_loss(ops, batch, &grad);
        if (!std::isfinite(loss))
            throw TrainingError("training loss diverged at step " + std::to_string(step));
        result.loss_history.push_back(loss);

        const double bc1 = 1.0 - std::pow(config.beta1, step);
        const double bc2 = 1.0 - std::pow(config.beta2, step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            params[i] -= config.lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.adam_eps) +
                                      config.weight_decay * params[i]);
        }
    }

    {
        MlpGradOps ops(result.model.spec(), params);
        result.final_holdout_loss = batch_loss(ops, holdout, nullptr);
    }
    return result;
}

}  // namespace basinlab
