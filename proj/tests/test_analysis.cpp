#include <doctest.h>

#include <cmath>

#include "basinlab/analysis.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/rng.hpp"

#include "helpers.hpp"

using namespace basinlab;

namespace {

TrajectoryTrace make_trace(std::vector<double> norms) {
    TrajectoryTrace t;
    const int T = static_cast<int>(norms.size());
    for (int i = 0; i < T; ++i) t.timesteps.push_back(T - i);
    t.residual_norms = std::move(norms);
    return t;
}

}  // namespace

TEST_CASE("transition detection on hand-built traces") {
    CHECK_FALSE(detect_transition_point(make_trace({5, 5, 5, 5})).timestep.has_value());

    const auto tp = detect_transition_point(make_trace({10, 10, 10, 2, 2}));
    REQUIRE(tp.timestep.has_value());
    CHECK(*tp.timestep == 3);
    CHECK(tp.drop_ratio == doctest::Approx(5.0));

    // gentle decay: max consecutive ratio 1.3
    std::vector<double> gentle{8.0};
    while (gentle.size() < 12) gentle.push_back(gentle.back() / 1.3);
    CHECK_FALSE(detect_transition_point(make_trace(gentle), 2.0).timestep.has_value());
    CHECK(detect_transition_point(make_trace(gentle), 1.2).timestep.has_value());

    CHECK_THROWS_AS(detect_transition_point(make_trace({1.0})), ConfigError);
}

TEST_CASE("transition detection is invariant under uniform positive scaling") {
    Rng rng(4);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> norms;
        for (int i = 0; i < 20; ++i) norms.push_back(0.1 + 5.0 * rng.uniform01());
        const auto base = detect_transition_point(make_trace(norms));
        const double scale = 0.01 + 100.0 * rng.uniform01();
        for (double& v : norms) v *= scale;
        const auto scaled_tp = detect_transition_point(make_trace(norms));
        CHECK(base.timestep == scaled_tp.timestep);
        if (base.timestep)
            CHECK(base.drop_ratio == doctest::Approx(scaled_tp.drop_ratio).epsilon(1e-12));
    }
}

TEST_CASE("transition comparison medians and the monotone-earlier flag") {
    SUBCASE("single group is trivially monotone") {
        const TransitionGroup g{0.0, {make_trace({10, 10, 2, 2})}};
        const auto cmp = compare_transition_points({&g, 1});
        CHECK(cmp.monotone_earlier);
        CHECK(cmp.groups.front().median_timestep == doctest::Approx(3.0));
    }

    SUBCASE("hand-built groups give exact medians, absent counts as earliest") {
        std::vector<TransitionGroup> groups(2);
        groups[0].sweep_value = 0.0;
        groups[0].traces = {make_trace({10, 10, 10, 2, 2}),   // t=3
                            make_trace({10, 10, 10, 10, 2}),  // t=2
                            make_trace({10, 10, 10, 2, 2})};  // t=3
        groups[1].sweep_value = 1.0;
        groups[1].traces = {make_trace({10, 2, 1, 1, 1}),     // t=5 would need low < median...
                            make_trace({5, 5, 5, 5, 5}),      // absent -> T+1 = 6
                            make_trace({10, 10, 2, 1, 1})};   // t=4
        const auto cmp = compare_transition_points(groups);
        CHECK(cmp.groups[0].median_timestep == doctest::Approx(3.0));
        CHECK(cmp.groups[1].absent_count >= 1);
        CHECK(cmp.groups[1].median_timestep > cmp.groups[0].median_timestep);
        CHECK(cmp.monotone_earlier);
    }

    SUBCASE("mixed trace lengths are rejected") {
        std::vector<TransitionGroup> groups(1);
        groups[0].traces = {make_trace({10, 2, 2}), make_trace({10, 2, 2, 2})};
        CHECK_THROWS_AS(compare_transition_points(groups), ConfigError);
    }
}

TEST_CASE("metric report on degenerate and separated clouds") {
    const auto world = test::smooth_world();

    SUBCASE("identical states on a duplicate target") {
        std::vector<Condition> conds(2);
        conds[0].id = "mem";
        conds[0].memorized = true;
        conds[0].components = {{0.9, {1.0, 1.0}, 0.01}, {0.1, {1.0, 1.0}, 0.5}};
        conds[1].id = "other";
        conds[1].components = {{1.0, {-2.0, 0.0}, 0.4}};
        const auto mem_world = build_gmm_world(2, std::move(conds));
        const std::vector<Vec> states(8, Vec{1.0, 1.0});
        const auto report = metric_report(states, mem_world, 0, 0.05);
        CHECK(report.duplicate_hit_rate == doctest::Approx(1.0));
        CHECK(report.diversity == doctest::Approx(0.0));

        const std::vector<Vec> far(4, Vec{-2.0, 0.0});
        CHECK(metric_report(far, mem_world, 1, 0.05).duplicate_hit_rate == doctest::Approx(0.0));
    }

    SUBCASE("true-conditional draws align better than draws from another condition") {
        Rng rng(9);
        std::vector<Vec> own, other;
        const auto& cond_a = world.conditions[0];
        const auto& cond_b = world.conditions[1];
        auto draw = [&](const Condition& c) {
            // sample the first component only; enough for the comparison
            Vec x = c.components.front().mean;
            for (auto& v : x) v += c.components.front().sigma * rng.gauss();
            return x;
        };
        for (int i = 0; i < 500; ++i) {
            own.push_back(draw(cond_a));
            other.push_back(draw(cond_b));
        }
        const double align_own = metric_report(own, world, 0, 0.05).alignment;
        const double align_other = metric_report(other, world, 0, 0.05).alignment;
        CHECK(align_own > align_other);
    }
}

TEST_CASE("chi log density: closed form, mode, normalization, sampling") {
    SUBCASE("d=1 half-normal value") {
        const double expected = std::log(std::sqrt(2.0 / M_PI) * std::exp(-0.5));
        CHECK(chi_log_density(1.0, 1) == doctest::Approx(expected).epsilon(1e-10));
    }

    SUBCASE("mode sits at sqrt(d-1)") {
        for (int d : {2, 4, 8}) {
            const double mode = std::sqrt(static_cast<double>(d - 1));
            const double peak = chi_log_density(mode, d);
            CHECK(chi_log_density(mode + 0.01, d) < peak);
            CHECK(chi_log_density(mode - 0.01, d) < peak);
        }
    }

    SUBCASE("density integrates to one") {
        for (int d : {1, 2, 4, 8}) {
            const double integral = test::simpson(
                [&](double r) { return r <= 0.0 ? 0.0 : std::exp(chi_log_density(r, d)); }, 1e-9,
                30.0, 20000);
            CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
        }
    }

    SUBCASE("empirical norms of gaussian draws follow the density") {
        const int d = 8, n = 100000;
        Rng rng(31);
        std::vector<double> norms;
        norms.reserve(n);
        for (int i = 0; i < n; ++i) norms.push_back(norm2(rng.gauss_vec(d)));
        const int bins = 24;
        const double lo = 0.5, hi = 5.5;
        std::vector<double> mass(bins, 0.0);
        for (double v : norms) {
            const int b = static_cast<int>((v - lo) / (hi - lo) * bins);
            if (b >= 0 && b < bins) mass[static_cast<std::size_t>(b)] += 1.0 / n;
        }
        for (int b = 0; b < bins; ++b) {
            const double a = lo + (hi - lo) * b / bins;
            const double z = lo + (hi - lo) * (b + 1) / bins;
            const double expected = test::simpson(
                [&](double r) { return std::exp(chi_log_density(r, d)); }, a, z, 64);
            if (expected < 1e-4) continue;  // skip empty tails
            const double stderr3 = 3.0 * std::sqrt(expected * (1.0 - expected) / n);
            CHECK(std::abs(mass[static_cast<std::size_t>(b)] - expected) <= stderr3 + 1e-3);
        }
    }

    CHECK_THROWS_AS(chi_log_density(0.0, 2), NumericError);
    CHECK_THROWS_AS(chi_log_density(-1.0, 2), NumericError);
}

TEST_CASE("regularized objective terms and the constancy identity") {
    const GmmDenoiser den(test::smooth_world(), NoiseSchedule::linear(14, 0.01, 0.22));

    SUBCASE("w=0 collapses to the residual norm alone") {
        const auto terms = regularized_objective_terms({0.7, -0.3}, den, 1, 0.0);
        CHECK(terms.decay_term == 0.0);
        CHECK(terms.log_radius_term == 0.0);
        CHECK(terms.residual_norm ==
              doctest::Approx(cond_residual(den, {0.7, -0.3}, 14, 1).norm).epsilon(1e-15));
    }

    SUBCASE("difference of -w*chi_log_density equals difference of the two terms") {
        Rng rng(6);
        for (int rep = 0; rep < 100; ++rep) {
            const Vec a = rng.gauss_vec(2);
            const Vec b = rng.gauss_vec(2);
            if (norm2(a) < 1e-6 || norm2(b) < 1e-6) continue;
            const double w = 0.01 + rng.uniform01();
            const auto ta = regularized_objective_terms(a, den, 0, w);
            const auto tb = regularized_objective_terms(b, den, 0, w);
            const double lhs =
                -w * chi_log_density(norm2(a), 2) - (-w * chi_log_density(norm2(b), 2));
            const double rhs = (ta.decay_term + ta.log_radius_term) -
                               (tb.decay_term + tb.log_radius_term);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }

    SUBCASE("d=1 has no log-radius term") {
        std::vector<Condition> conds(2);
        conds[0].id = "a";
        conds[0].components = {{1.0, {0.5}, 0.4}};
        conds[1].id = "b";
        conds[1].components = {{1.0, {-0.5}, 0.4}};
        const GmmDenoiser den1(build_gmm_world(1, std::move(conds)),
                               NoiseSchedule::linear(6, 0.05, 0.2));
        const auto terms = regularized_objective_terms({2.0}, den1, 0, 0.3);
        CHECK(terms.log_radius_term == 0.0);
        CHECK(terms.decay_term == doctest::Approx(0.3 * 4.0 / 2.0));
    }

    CHECK_THROWS_AS(regularized_objective_terms({0.0, 0.0}, den, 0, 0.1), NumericError);
}

TEST_CASE("jensen-shannon divergence of norm histograms") {
    SUBCASE("identical sets give zero, disjoint sets give ln 2") {
        std::vector<double> a{1.0, 1.2, 1.4, 1.6};
        CHECK(norm_distribution_jsd(a, a, 8).jsd == doctest::Approx(0.0));
        std::vector<double> b{5.0, 5.2, 5.4, 5.6};
        CHECK(norm_distribution_jsd(a, b, 8).jsd == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("symmetric and bounded") {
        Rng rng(19);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> a, b;
            for (int i = 0; i < 200; ++i) {
                a.push_back(2.0 + rng.gauss());
                b.push_back(2.0 + 0.7 * rng.gauss() + rng.uniform01());
            }
            const double ab = norm_distribution_jsd(a, b, 32).jsd;
            const double ba = norm_distribution_jsd(b, a, 32).jsd;
            CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
            CHECK(ab >= 0.0);
            CHECK(ab <= std::log(2.0) + 1e-12);
        }
    }

    SUBCASE("two gaussian samples against an expected-mass quadrature oracle") {
        const double mu1 = 2.0, s1 = 0.5, mu2 = 2.8, s2 = 0.7;
        Rng rng(23);
        const int n = 200000;
        std::vector<double> a, b;
        a.reserve(n);
        b.reserve(n);
        for (int i = 0; i < n; ++i) {
            a.push_back(mu1 + s1 * rng.gauss());
            b.push_back(mu2 + s2 * rng.gauss());
        }
        const int bins = 64;
        const auto report = norm_distribution_jsd(a, b, bins);

        auto phi = [](double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); };
        auto bin_mass = [&](double mu, double s, int k) {
            return phi((report.bin_edges[k + 1] - mu) / s) - phi((report.bin_edges[k] - mu) / s);
        };
        double oracle = 0.0;
        double pa_total = 0.0, pb_total = 0.0;
        std::vector<double> pa(bins), pb(bins);
        for (int k = 0; k < bins; ++k) {
            pa[k] = bin_mass(mu1, s1, k);
            pb[k] = bin_mass(mu2, s2, k);
            pa_total += pa[k];
            pb_total += pb[k];
        }
        for (int k = 0; k < bins; ++k) {
            const double p = pa[k] / pa_total, q = pb[k] / pb_total;
            const double m = 0.5 * (p + q);
            if (p > 0.0) oracle += 0.5 * p * std::log(p / m);
            if (q > 0.0) oracle += 0.5 * q * std::log(q / m);
        }
        CHECK(report.jsd == doctest::Approx(oracle).epsilon(0.02));
    }

    const std::vector<double> empty, one{1.0};
    CHECK_THROWS_AS(norm_distribution_jsd(empty, one, 8), ConfigError);
    CHECK_THROWS_AS(norm_distribution_jsd(one, one, 1), ConfigError);
}
