#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "basinlab/denoiser.hpp"
#include "basinlab/rng.hpp"
#include "basinlab/schedule.hpp"
#include "basinlab/vec.hpp"
#include "basinlab/world.hpp"

namespace basinlab::test {

// ---------------------------------------------------------------------------
// fixture worlds
// ---------------------------------------------------------------------------

/// Three-condition world with smooth components only; useful wherever the
/// analytic density must exist everywhere.
inline GmmWorld smooth_world() {
    std::vector<Condition> conds(3);
    conds[0].id = "A";
    conds[0].components = {{0.6, {-2.0, 0.0}, 0.5}, {0.4, {-2.0, 1.5}, 0.4}};
    conds[1].id = "B";
    conds[1].components = {{1.0, {2.0, -1.0}, 0.6}};
    conds[2].id = "C";
    conds[2].components = {{0.3, {0.0, 2.0}, 0.5}, {0.7, {1.0, 2.0}, 0.3}};
    return build_gmm_world(2, std::move(conds));
}

/// Two single-Gaussian conditions with all prior mass on the second, so the
/// null mixture is exactly a single Gaussian.
inline GmmWorld two_gaussian_world(Vec mu_y, Vec mu_null, double sigma) {
    std::vector<Condition> conds(2);
    conds[0].id = "Y";
    conds[0].components = {{1.0, std::move(mu_y), sigma}};
    conds[1].id = "NULL_CARRIER";
    conds[1].components = {{1.0, std::move(mu_null), sigma}};
    return build_gmm_world(2, std::move(conds), {0.0, 1.0});
}

// ---------------------------------------------------------------------------
// independent oracles (no dependence on the implementation paths they check)
// ---------------------------------------------------------------------------

/// Direct long-double summation of the t-marginal mixture density of one
/// condition (or the prior-weighted union when cond_index < 0).
inline long double direct_marginal_density(const GmmWorld& world, const NoiseSchedule& schedule,
                                           const Vec& x, int t, int cond_index) {
    const long double ab = static_cast<long double>(schedule.alpha_bar_at(t));
    const long double pi = 3.14159265358979323846264338327950288L;
    long double total = 0.0L;
    for (std::size_t ci = 0; ci < world.conditions.size(); ++ci) {
        if (cond_index >= 0 && static_cast<int>(ci) != cond_index) continue;
        const long double pw =
            cond_index >= 0 ? 1.0L : static_cast<long double>(world.prior[ci]);
        for (const auto& comp : world.conditions[ci].components) {
            const long double var =
                ab * comp.sigma * comp.sigma + (1.0L - ab);
            long double q = 0.0L;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const long double dx = x[i] - std::sqrt(ab) * comp.mean[i];
                q += dx * dx;
            }
            const long double norm =
                std::pow(2.0L * pi * var, -static_cast<long double>(x.size()) / 2.0L);
            total += pw * comp.weight * norm * std::exp(-q / (2.0L * var));
        }
    }
    return total;
}

/// Central finite differences of a scalar function of a vector.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-5) {
    Vec g(x.size());
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_error(const Vec& a, const Vec& b) {
    const double scale = std::max(norm2(a), norm2(b));
    if (scale == 0.0) return 0.0;
    return dist2(a, b) / scale;
}

/// Simpson quadrature on [lo, hi] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double sum = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) sum += f(lo + h * i) * ((i % 2) ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace basinlab::test
