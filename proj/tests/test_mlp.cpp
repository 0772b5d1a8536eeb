#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "basinlab/errors.hpp"
#include "basinlab/mlp.hpp"
#include "basinlab/rng.hpp"

#include "helpers.hpp"

using namespace basinlab;

namespace {

MlpSpec small_spec(int n_conditions, int T) {
    MlpSpec s;
    s.d = 2;
    s.hidden = 24;
    s.hidden_layers = 3;
    s.time_features = 6;
    s.embed_dim = 3;
    s.n_conditions = n_conditions;
    s.T = T;
    return s;
}

}  // namespace

TEST_CASE("initialization is deterministic and training with 0 steps is a no-op") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(16, 0.01, 0.25);
    const auto ds = sample_dataset(world, 50, 1, 5);

    TrainConfig cfg;
    cfg.steps = 0;
    cfg.seed = 99;
    const auto res = train_mlp(world, ds, schedule, cfg, small_spec(3, 16));
    const auto fresh = MlpDenoiser::init(res.model.spec(), 99);
    CHECK(res.model.parameters() == fresh.parameters());
    CHECK(res.initial_holdout_loss == res.final_holdout_loss);
}

TEST_CASE("eval is pure and respects argument validation") {
    const auto den = MlpDenoiser::init(small_spec(3, 16), 7);
    const Vec x{0.3, -0.4};
    CHECK(den.eval(x, 5, 1) == den.eval(x, 5, 1));
    CHECK(den.eval(x, 5, kNullCond).size() == 2);
    CHECK_THROWS_AS(den.eval(x, 0, 1), ConfigError);
    CHECK_THROWS_AS(den.eval(x, 17, 1), ConfigError);
    CHECK_THROWS_AS(den.eval(x, 5, 3), ConfigError);
    CHECK_THROWS_AS(den.eval(Vec{1.0}, 5, 1), ConfigError);
}

TEST_CASE("network residual-norm gradient matches finite differences") {
    const auto den = MlpDenoiser::init(small_spec(4, 20), 1234);
    Rng rng(55);
    int checked = 0;
    while (checked < 100) {
        const Vec x = rng.gauss_vec(2);
        const int t = 1 + static_cast<int>(rng.below(20));
        const int y = static_cast<int>(rng.below(4));
        if (cond_residual(den, x, t, y).norm < 1e-5) continue;
        ++checked;
        const Vec grad = den.residual_norm_grad(x, t, y);
        const auto oracle = test::fd_gradient(
            [&](const Vec& p) { return cond_residual(den, p, t, y).norm; }, x, 1e-5);
        CHECK(test::rel_error(grad, oracle) < 1e-4);
    }
}

TEST_CASE("training reduces the held-out epsilon-matching loss, deterministically") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(16, 0.01, 0.25);
    const auto ds = sample_dataset(world, 120, 1, 3);

    TrainConfig cfg;
    cfg.steps = 250;
    cfg.batch = 32;
    cfg.lr = 3e-3;
    cfg.holdout = 128;
    cfg.seed = 11;
    const auto res = train_mlp(world, ds, schedule, cfg, small_spec(3, 16));
    CHECK(res.final_holdout_loss < res.initial_holdout_loss);
    CHECK(res.loss_history.size() == 250);

    const auto res2 = train_mlp(world, ds, schedule, cfg, small_spec(3, 16));
    CHECK(res.model.parameters() == res2.model.parameters());
}

TEST_CASE("serialization round-trips parameters and predictions exactly") {
    const auto den = MlpDenoiser::init(small_spec(3, 12), 21);
    const std::string path = "mlp_roundtrip_test.json";
    den.save_json(path);
    const auto loaded = MlpDenoiser::load_json(path);
    std::remove(path.c_str());
    CHECK(loaded.parameters() == den.parameters());
    const Vec x{0.9, -1.2};
    CHECK(loaded.eval(x, 7, 2) == den.eval(x, 7, 2));
    CHECK_THROWS_AS(MlpDenoiser::load_json("missing_model.json"), ConfigError);
}

TEST_CASE("empty dataset and orphan condition ids are rejected") {
    const auto world = test::smooth_world();
    const auto schedule = NoiseSchedule::linear(8, 0.01, 0.2);
    CHECK_THROWS_AS(train_mlp(world, Dataset{}, schedule, TrainConfig{}), ConfigError);
    Dataset bad;
    bad.points.push_back({{0.0, 0.0}, 12});
    CHECK_THROWS_AS(train_mlp(world, bad, schedule, TrainConfig{}), ConfigError);
}
