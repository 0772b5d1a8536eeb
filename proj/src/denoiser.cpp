#include "basinlab/denoiser.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "basinlab/errors.hpp"

namespace basinlab {

ConditionalResidual cond_residual(const Denoiser& den, const Vec& x, int t, int y) {
    if (y == kNullCond) throw ConfigError("cond_residual requires a real condition");
    ConditionalResidual r;
    r.value = den.eval(x, t, y);
    const Vec e_null = den.eval(x, t, kNullCond);
    for (std::size_t i = 0; i < r.value.size(); ++i) r.value[i] -= e_null[i];
    r.norm = norm2(r.value);
    return r;
}

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

struct ScaledComponent {
    double log_weight;
    Vec mean;      // sqrt(alpha_bar) * mu
    double var;    // alpha_bar * sigma^2 + 1 - alpha_bar
};

struct ScoreResult {
    Vec score;
    std::vector<double> hessian;  // d x d row-major, filled only when requested
    double log_density = 0.0;
};

}  // namespace

GmmDenoiser::GmmDenoiser(GmmWorld world, NoiseSchedule schedule)
    : world_(std::move(world)), schedule_(std::move(schedule)) {
    for (std::size_t ci = 0; ci < world_.conditions.size(); ++ci) {
        const double p = world_.prior[ci];
        if (p <= 0.0) continue;
        for (const auto& c : world_.conditions[ci].components)
            null_mixture_.push_back({p * c.weight, c.mean, c.sigma});
    }
}

namespace {

std::vector<ScaledComponent> scale_mixture(const std::vector<GmmComponent>& comps,
                                           double alpha_bar, int t) {
    std::vector<ScaledComponent> out;
    out.reserve(comps.size());
    const double sqrt_ab = std::sqrt(alpha_bar);
    for (const auto& c : comps) {
        const double var = alpha_bar * c.sigma * c.sigma + (1.0 - alpha_bar);
        if (!(var > 0.0))
            throw NumericError("degenerate marginal variance at t=" + std::to_string(t));
        ScaledComponent s;
        s.log_weight = std::log(c.weight);
        s.mean = scaled(c.mean, sqrt_ab);
        s.var = var;
        out.push_back(std::move(s));
    }
    return out;
}

/// Score (and optionally Hessian) of the log density of an isotropic Gaussian
/// mixture, computed with log-sum-exp-stable responsibilities.
ScoreResult mixture_score(const Vec& x, const std::vector<ScaledComponent>& comps,
                          bool with_hessian) {
    const int d = static_cast<int>(x.size());
    const std::size_t K = comps.size();

    std::vector<double> log_terms(K);
    double max_term = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
        double q = 0.0;
        for (int i = 0; i < d; ++i) {
            const double dx = x[static_cast<std::size_t>(i)] - comps[k].mean[static_cast<std::size_t>(i)];
            q += dx * dx;
        }
        log_terms[k] = comps[k].log_weight -
                       0.5 * (d * (kLogTwoPi + std::log(comps[k].var)) + q / comps[k].var);
        max_term = std::max(max_term, log_terms[k]);
    }
    double norm_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) norm_sum += std::exp(log_terms[k] - max_term);

    ScoreResult res;
    res.log_density = max_term + std::log(norm_sum);
    res.score.assign(static_cast<std::size_t>(d), 0.0);
    if (with_hessian) res.hessian.assign(static_cast<std::size_t>(d * d), 0.0);

    Vec u(static_cast<std::size_t>(d));
    for (std::size_t k = 0; k < K; ++k) {
        const double r = std::exp(log_terms[k] - max_term) / norm_sum;
        for (int i = 0; i < d; ++i)
            u[static_cast<std::size_t>(i)] =
                (comps[k].mean[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) /
                comps[k].var;
        axpy(res.score, r, u);
        if (with_hessian) {
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j)
                    res.hessian[static_cast<std::size_t>(i * d + j)] +=
                        r * u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(j)];
                res.hessian[static_cast<std::size_t>(i * d + i)] -= r / comps[k].var;
            }
        }
    }
    if (with_hessian) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                res.hessian[static_cast<std::size_t>(i * d + j)] -=
                    res.score[static_cast<std::size_t>(i)] * res.score[static_cast<std::size_t>(j)];
    }
    return res;
}

}  // namespace

double GmmDenoiser::marginal_log_density(const Vec& x, int t, int y) const {
    const double ab = schedule_.alpha_bar_at(t);
    const auto& comps = (y == kNullCond)
                            ? null_mixture_
                            : world_.conditions.at(static_cast<std::size_t>(y)).components;
    return mixture_score(x, scale_mixture(comps, ab, t), false).log_density;
}

Vec GmmDenoiser::eval(const Vec& x, int t, int y) const {
    if (static_cast<int>(x.size()) != world_.d) throw ConfigError("state dimension mismatch");
    if (y != kNullCond && (y < 0 || y >= static_cast<int>(world_.conditions.size())))
        throw ConfigError("condition index out of range");
    const double ab = schedule_.alpha_bar_at(t);
    const auto& comps = (y == kNullCond)
                            ? null_mixture_
                            : world_.conditions[static_cast<std::size_t>(y)].components;
    const auto res = mixture_score(x, scale_mixture(comps, ab, t), false);
    return scaled(res.score, -std::sqrt(1.0 - ab));
}

Vec GmmDenoiser::residual_norm_grad(const Vec& x, int t, int y) const {
    if (y == kNullCond) throw ConfigError("residual gradient requires a real condition");
    const double ab = schedule_.alpha_bar_at(t);
    const double scale = -std::sqrt(1.0 - ab);
    const int d = world_.d;

    const auto cond = mixture_score(
        x, scale_mixture(world_.conditions.at(static_cast<std::size_t>(y)).components, ab, t),
        true);
    const auto null = mixture_score(x, scale_mixture(null_mixture_, ab, t), true);

    // residual g = scale * (s_y - s_null); its Jacobian is scale * (H_y - H_null),
    // symmetric, so grad ||g|| = scale * (H_y - H_null) * g / ||g||.
    Vec g(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
        g[static_cast<std::size_t>(i)] =
            scale * (cond.score[static_cast<std::size_t>(i)] - null.score[static_cast<std::size_t>(i)]);
    const double gnorm = norm2(g);
    if (gnorm == 0.0)
        throw NumericError("residual is zero; the norm gradient is undefined");

    Vec grad(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
            const double h = cond.hessian[static_cast<std::size_t>(i * d + j)] -
                             null.hessian[static_cast<std::size_t>(i * d + j)];
            acc += h * g[static_cast<std::size_t>(j)];
        }
        grad[static_cast<std::size_t>(i)] = scale * acc / gnorm;
    }
    return grad;
}

}  // namespace basinlab
