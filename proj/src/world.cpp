#include "basinlab/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "basinlab/errors.hpp"
#include "basinlab/rng.hpp"

namespace basinlab {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// log N(x; mean, sigma^2 I), isotropic.
double gaussian_log_density(const Vec& x, const Vec& mean, double sigma) {
    const double v = sigma * sigma;
    const int d = static_cast<int>(x.size());
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mean[i];
        q += dx * dx;
    }
    return -0.5 * (d * (kLogTwoPi + std::log(v)) + q / v);
}

double log_sum_exp(const std::vector<double>& terms) {
    double m = -std::numeric_limits<double>::infinity();
    for (double t : terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

}  // namespace

const GmmComponent& Condition::dominant() const {
    if (components.empty()) throw ConfigError("condition '" + id + "' has no components");
    std::size_t best = 0;
    for (std::size_t k = 1; k < components.size(); ++k)
        if (components[k].weight > components[best].weight) best = k;
    return components[best];
}

int GmmWorld::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < conditions.size(); ++i)
        if (conditions[i].id == id) return static_cast<int>(i);
    return -1;
}

const Condition& GmmWorld::condition(std::string_view id) const {
    const int i = index_of(id);
    if (i < 0) throw ConfigError("unknown condition id '" + std::string(id) + "'");
    return conditions[static_cast<std::size_t>(i)];
}

int GmmWorld::memorized_index() const {
    for (std::size_t i = 0; i < conditions.size(); ++i)
        if (conditions[i].memorized) return static_cast<int>(i);
    return -1;
}

double GmmWorld::cond_log_density(const Vec& x, int cond_index) const {
    if (cond_index < 0 || cond_index >= static_cast<int>(conditions.size()))
        throw ConfigError("condition index out of range");
    const auto& cond = conditions[static_cast<std::size_t>(cond_index)];
    std::vector<double> terms;
    terms.reserve(cond.components.size());
    for (const auto& c : cond.components) {
        if (c.sigma <= 0.0)
            throw NumericError("data-space density undefined for sigma=0 component in '" +
                               cond.id + "'");
        terms.push_back(std::log(c.weight) + gaussian_log_density(x, c.mean, c.sigma));
    }
    return log_sum_exp(terms);
}

double GmmWorld::null_log_density(const Vec& x) const {
    std::vector<double> terms;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (prior[i] <= 0.0) continue;
        terms.push_back(std::log(prior[i]) + cond_log_density(x, static_cast<int>(i)));
    }
    return log_sum_exp(terms);
}

std::vector<Vec> GmmWorld::duplicate_targets() const {
    std::vector<Vec> targets;
    for (const auto& cond : conditions)
        if (cond.memorized) targets.push_back(cond.dominant().mean);
    return targets;
}

GmmWorld build_gmm_world(int d, std::vector<Condition> conditions, std::vector<double> prior,
                         MemorizedCriteria criteria) {
    if (d < 1) throw ConfigError("world dimension must be >= 1");
    if (conditions.size() < 2) throw ConfigError("world needs at least 2 conditions");

    int memorized_count = 0;
    for (const auto& cond : conditions) {
        if (cond.components.empty())
            throw ConfigError("condition '" + cond.id + "' has no components");
        double wsum = 0.0;
        for (const auto& c : cond.components) {
            if (c.weight < 0.0) throw ConfigError("negative component weight in '" + cond.id + "'");
            if (c.sigma < 0.0) throw ConfigError("negative component sigma in '" + cond.id + "'");
            if (static_cast<int>(c.mean.size()) != d)
                throw ConfigError("component mean dimension mismatch in '" + cond.id + "'");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > kWeightTol)
            throw ConfigError("component weights of '" + cond.id + "' sum to " +
                              std::to_string(wsum) + ", expected 1");
        if (cond.memorized) {
            ++memorized_count;
            const auto& dom = cond.dominant();
            if (dom.sigma > criteria.sigma_max || dom.weight < criteria.weight_min)
                throw ConfigError("memorized condition '" + cond.id +
                                  "' violates the near-delta criterion (sigma <= " +
                                  std::to_string(criteria.sigma_max) + ", weight >= " +
                                  std::to_string(criteria.weight_min) + ")");
        }
    }
    if (memorized_count > 1) throw ConfigError("at most one condition may be flagged memorized");

    if (prior.empty()) {
        prior.assign(conditions.size(), 1.0 / static_cast<double>(conditions.size()));
    } else {
        if (prior.size() != conditions.size())
            throw ConfigError("prior length does not match condition count");
        double psum = 0.0;
        for (double p : prior) {
            if (p < 0.0) throw ConfigError("negative prior weight");
            psum += p;
        }
        if (psum <= 0.0) throw ConfigError("prior weights sum to zero");
        for (double& p : prior) p /= psum;
    }

    GmmWorld world;
    world.d = d;
    world.conditions = std::move(conditions);
    world.prior = std::move(prior);
    world.criteria = criteria;
    return world;
}

GmmWorld ring_world(int n_conditions, double radius, double sigma, double mem_sigma,
                    double mem_weight, double mem_broad_sigma) {
    if (n_conditions < 2) throw ConfigError("ring world needs at least 2 conditions");
    const double two_pi = 6.283185307179586476925286766559;
    std::vector<Condition> conditions;
    for (int i = 0; i < n_conditions; ++i) {
        const double theta = two_pi * (static_cast<double>(i) + 0.5) / n_conditions;
        const Vec center{radius * std::cos(theta), radius * std::sin(theta)};
        Condition cond;
        cond.id = (i == n_conditions - 1) ? "MEM" : std::string(1, static_cast<char>('A' + i));
        if (i == n_conditions - 1) {
            // Memorized: a near-delta carrying most of the mass, plus a broad
            // component at the same center that plays the role of the
            // condition's non-copied semantic neighborhood.
            cond.memorized = true;
            cond.components.push_back({mem_weight, center, mem_sigma});
            cond.components.push_back({1.0 - mem_weight, center, mem_broad_sigma});
        } else {
            // Two sub-modes per ordinary condition, offset along the ring.
            const double spread = 0.35;
            const Vec m1{radius * std::cos(theta - spread / radius),
                         radius * std::sin(theta - spread / radius)};
            const Vec m2{radius * std::cos(theta + spread / radius),
                         radius * std::sin(theta + spread / radius)};
            cond.components.push_back({0.5, m1, sigma});
            cond.components.push_back({0.5, m2, sigma});
        }
        conditions.push_back(std::move(cond));
    }
    return build_gmm_world(2, std::move(conditions));
}

Dataset sample_dataset(const GmmWorld& world, int n_per_condition, int duplication_factor,
                       std::uint64_t seed) {
    if (n_per_condition < 0) throw ConfigError("n_per_condition must be >= 0");
    if (duplication_factor < 1) throw ConfigError("duplication_factor must be >= 1");

    Dataset ds;
    Rng rng(mix_seed(seed, 0x5da7a5e7ULL));
    for (std::size_t ci = 0; ci < world.conditions.size(); ++ci) {
        const auto& cond = world.conditions[ci];
        if (cond.memorized) {
            const Vec& target = cond.dominant().mean;
            for (int n = 0; n < duplication_factor; ++n) {
                ds.duplicate_index.push_back(ds.points.size());
                ds.points.push_back({target, static_cast<int>(ci)});
            }
            continue;
        }
        for (int n = 0; n < n_per_condition; ++n) {
            // Pick a component by weight, then draw from it.
            double u = rng.uniform01();
            std::size_t k = 0;
            for (; k + 1 < cond.components.size(); ++k) {
                u -= cond.components[k].weight;
                if (u <= 0.0) break;
            }
            const auto& comp = cond.components[k];
            Vec x = comp.mean;
            for (int i = 0; i < world.d; ++i) x[static_cast<std::size_t>(i)] += comp.sigma * rng.gauss();
            ds.points.push_back({std::move(x), static_cast<int>(ci)});
        }
    }
    return ds;
}

}  // namespace basinlab
