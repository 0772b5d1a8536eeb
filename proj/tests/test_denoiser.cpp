#include <doctest.h>

#include <cmath>

#include "basinlab/denoiser.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/rng.hpp"

#include "helpers.hpp"

using namespace basinlab;

namespace {

GmmWorld delta_world(const Vec& mu) {
    std::vector<Condition> conds(2);
    conds[0].id = "delta";
    conds[0].memorized = true;
    conds[0].components = {{1.0, mu, 0.0}};
    conds[1].id = "other";
    conds[1].components = {{1.0, {0.0, 0.0}, 1.0}};
    return build_gmm_world(2, std::move(conds));
}

}  // namespace

TEST_CASE("single sigma=0 component: prediction at and away from the mode") {
    const Vec mu{1.5, -0.5};
    const auto world = delta_world(mu);
    const auto schedule = NoiseSchedule::linear(10, 0.02, 0.3);
    const GmmDenoiser den(world, schedule);

    const int t = 7;
    const double ab = schedule.alpha_bar_at(t);

    // at the marginal mode the score vanishes
    const Vec at_mode = den.eval(scaled(mu, std::sqrt(ab)), t, 0);
    CHECK(norm2(at_mode) < 1e-12);

    // generic point: (x - sqrt(ab) mu) / sqrt(1 - ab)
    const Vec x{0.3, 0.9};
    const Vec pred = den.eval(x, t, 0);
    for (int i = 0; i < 2; ++i)
        CHECK(pred[i] ==
              doctest::Approx((x[i] - std::sqrt(ab) * mu[i]) / std::sqrt(1.0 - ab)).epsilon(1e-12));
}

TEST_CASE("eval equals -sqrt(1-ab) times the numerical log-density gradient") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(50, 0.003, 0.25);
    const GmmDenoiser den(world, schedule);
    Rng rng(17);

    for (int t : {1, 25, 50}) {
        const double ab = schedule.alpha_bar_at(t);
        for (int rep = 0; rep < 40; ++rep) {
            Vec x = rng.gauss_vec(2);
            x[0] *= 1.5;
            x[1] *= 1.5;
            for (int y : {0, 1, 2, kNullCond}) {
                const auto oracle = test::fd_gradient(
                    [&](const Vec& p) {
                        return static_cast<double>(
                            std::log(test::direct_marginal_density(world, schedule, p, t, y)));
                    },
                    x, 1e-6);
                const Vec expected = scaled(oracle, -std::sqrt(1.0 - ab));
                CHECK(test::rel_error(den.eval(x, t, y), expected) < 1e-6);
            }
        }
    }
}

TEST_CASE("eval is pure: identical calls, identical bits") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(20, 0.01, 0.2);
    const GmmDenoiser den(world, schedule);
    const Vec x{0.4, -1.1};
    const Vec a = den.eval(x, 11, 1);
    const Vec b = den.eval(x, 11, 1);
    CHECK(a == b);
}

TEST_CASE("conditional residual: cancellation, closed form, and definition") {
    const auto schedule = NoiseSchedule::linear(12, 0.01, 0.2);

    SUBCASE("condition equal to the null mixture gives a zero residual") {
        // both conditions identical and equal priors: each equals the union
        std::vector<Condition> conds(2);
        conds[0].id = "a";
        conds[0].components = {{1.0, {0.7, -0.2}, 0.8}};
        conds[1].id = "b";
        conds[1].components = {{1.0, {0.7, -0.2}, 0.8}};
        const GmmDenoiser den(build_gmm_world(2, std::move(conds)), schedule);
        const auto r = cond_residual(den, {1.0, 2.0}, 5, 0);
        CHECK(r.norm < 1e-13);
    }

    SUBCASE("two single-Gaussian mixtures: residual constant in x") {
        const Vec mu_y{1.0, 2.0};
        const Vec mu_0{-1.0, 0.5};
        const double sigma = 0.7;
        const GmmDenoiser den(test::two_gaussian_world(mu_y, mu_0, sigma), schedule);
        const int t = 9;
        const double ab = schedule.alpha_bar_at(t);
        const double var = ab * sigma * sigma + (1.0 - ab);
        Rng rng(5);
        for (int rep = 0; rep < 10; ++rep) {
            const Vec x = rng.gauss_vec(2);
            const auto r = cond_residual(den, x, t, 0);
            for (int i = 0; i < 2; ++i) {
                const double expected =
                    std::sqrt(ab) * (mu_0[i] - mu_y[i]) * std::sqrt(1.0 - ab) / var;
                CHECK(r.value[i] == doctest::Approx(expected).epsilon(1e-10));
            }
        }
    }

    SUBCASE("residual equals the difference of separate eval calls, bit for bit") {
        const GmmDenoiser den(test::smooth_world(), schedule);
        const Vec x{0.2, 0.4};
        const auto r = cond_residual(den, x, 3, 2);
        const Vec e_y = den.eval(x, 3, 2);
        const Vec e_null = den.eval(x, 3, kNullCond);
        for (int i = 0; i < 2; ++i) CHECK(r.value[i] == e_y[i] - e_null[i]);
        CHECK(r.norm == norm2(r.value));
        CHECK_THROWS_AS(cond_residual(den, x, 3, kNullCond), ConfigError);
    }
}

TEST_CASE("analytic residual-norm gradient matches finite differences") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(30, 0.005, 0.25);
    const GmmDenoiser den(world, schedule);
    Rng rng(23);

    int checked = 0;
    for (int rep = 0; rep < 120 && checked < 100; ++rep) {
        Vec x = rng.gauss_vec(2);
        x[0] *= 1.4;
        const int t = 1 + static_cast<int>(rng.below(30));
        const int y = static_cast<int>(rng.below(3));
        if (cond_residual(den, x, t, y).norm < 1e-6) continue;  // stay away from the kink
        ++checked;
        const Vec grad = den.residual_norm_grad(x, t, y);
        const auto oracle = test::fd_gradient(
            [&](const Vec& p) { return cond_residual(den, p, t, y).norm; }, x, 1e-5);
        CHECK(test::rel_error(grad, oracle) < 1e-4);
    }
    CHECK(checked == 100);
}

TEST_CASE("gradient of a constant residual is zero; descent direction decreases the norm") {
    const auto schedule = NoiseSchedule::linear(12, 0.01, 0.2);

    SUBCASE("constant-residual world") {
        const GmmDenoiser den(test::two_gaussian_world({1.0, 2.0}, {-1.0, 0.5}, 0.7), schedule);
        const Vec g = den.residual_norm_grad({0.3, -0.8}, 9, 0);
        CHECK(norm2(g) < 1e-10);
    }

    SUBCASE("small step against the gradient strictly decreases the norm") {
        const GmmDenoiser den(test::smooth_world(), schedule);
        Rng rng(31);
        int probes = 0;
        while (probes < 100) {
            Vec x = rng.gauss_vec(2);
            x[0] *= 1.2;
            const int t = 1 + static_cast<int>(rng.below(12));
            const auto before = cond_residual(den, x, t, 0);
            if (before.norm < 1e-4) continue;
            const Vec g = den.residual_norm_grad(x, t, 0);
            if (norm2(g) < 1e-8) continue;
            ++probes;
            Vec stepped = x;
            axpy(stepped, -1e-4, g);
            CHECK(cond_residual(den, stepped, t, 0).norm < before.norm);
        }
    }

    SUBCASE("zero residual raises the undefined-gradient error") {
        std::vector<Condition> conds(2);
        conds[0].id = "a";
        conds[0].components = {{1.0, {0.0, 0.0}, 0.5}};
        conds[1].id = "b";
        conds[1].components = {{1.0, {0.0, 0.0}, 0.5}};
        const GmmDenoiser den(build_gmm_world(2, std::move(conds)), schedule);
        CHECK_THROWS_AS(den.residual_norm_grad({0.4, 0.4}, 5, 0), NumericError);
    }
}

TEST_CASE("counting wrapper sees every evaluation") {
    const GmmDenoiser inner(test::smooth_world(), NoiseSchedule::linear(8, 0.01, 0.2));
    const CountingDenoiser den(inner);
    CHECK(den.evals() == 0);
    (void)cond_residual(den, {0.1, 0.2}, 4, 1);
    CHECK(den.evals() == 2);
    (void)den.residual_norm_grad({0.1, 0.2}, 4, 1);
    CHECK(den.grads() == 1);
    den.reset();
    CHECK(den.evals() == 0);
}
