"""Smoke tests for the python module: exercise the main operations end to end."""

import math
import os

import pytest

import basinlab as bl


@pytest.fixture(scope="module")
def schedule():
    return bl.NoiseSchedule.linear(25, 0.002, 0.182)


@pytest.fixture(scope="module")
def world():
    return bl.ring_world()


@pytest.fixture(scope="module")
def denoiser(world, schedule):
    return bl.GmmDenoiser(world, schedule)


def test_schedule_invariants(schedule):
    assert schedule.T == 25
    prev = 1.0
    for t in range(1, 26):
        ab = schedule.alpha_bar_at(t)
        assert 0.0 < ab < prev
        assert math.isclose(ab, prev * schedule.alpha_at(t), rel_tol=1e-12)
        prev = ab
    with pytest.raises(ValueError):
        bl.NoiseSchedule.linear(0, 0.1, 0.2)


def test_forward_noise_closed_form(schedule):
    out = bl.forward_noise([0.0, 0.0], 5, [1.0, -1.0], schedule)
    ab = schedule.alpha_bar_at(5)
    assert math.isclose(out[0], math.sqrt(1.0 - ab), rel_tol=1e-12)
    assert math.isclose(out[1], -math.sqrt(1.0 - ab), rel_tol=1e-12)


def test_world_and_dataset(world):
    assert world.d == 2
    mi = world.memorized_index()
    assert world.conditions[mi].memorized
    ds = bl.sample_dataset(world, 20, 50, seed=7)
    assert len(ds.duplicate_index) == 50
    dup = world.duplicate_targets()[0]
    assert ds.points[ds.duplicate_index[0]].x0 == dup


def test_denoiser_and_residual(denoiser, world):
    y = world.memorized_index()
    x = [0.3, -0.8]
    r = bl.cond_residual(denoiser, x, 10, y)
    e_y = denoiser.eval(x, 10, y)
    e_null = denoiser.eval(x, 10, bl.NULL_COND)
    for i in range(2):
        assert math.isclose(r.value[i], e_y[i] - e_null[i], rel_tol=0, abs_tol=0)
    assert r.norm >= 0.0

    grad = denoiser.residual_norm_grad(x, 10, y)
    # descent direction check
    stepped = [x[i] - 1e-4 * grad[i] for i in range(2)]
    assert bl.cond_residual(denoiser, stepped, 10, y).norm < r.norm


def test_sampling_and_policies(denoiser, world, schedule):
    y = world.memorized_index()
    x_T = bl.Rng(17).gauss_vec(2)
    none = bl.sample(denoiser, "none", 0.0, 0, x_T, y, schedule)
    deferred0 = bl.sample(denoiser, "deferred", 5.0, 0, x_T, y, schedule)
    assert none.final_state == deferred0.final_state
    assert none.residual_norms == deferred0.residual_norms
    assert none.timesteps[0] == 25 and none.timesteps[-1] == 1

    trace = bl.trace_without_cfg(denoiser, x_T, y, schedule)
    assert trace.residual_norms == none.residual_norms


def test_mitigation_ops(denoiser, world):
    y = world.memorized_index()
    x = bl.Rng(3).gauss_vec(2)
    p = bl.sharpness_perturbation(denoiser, x, y, rho=0.7)
    assert math.isclose(math.hypot(*p.delta), 0.7, abs_tol=1e-12)

    cfg = bl.BatchwiseConfig()
    cfg.gamma_tilde = 0.0
    adjusted = bl.batchwise_adjust(denoiser, [x], y, cfg)
    assert adjusted[0] == x

    ps = bl.PersampleConfig()
    ps.l_target = 1e9
    res = bl.persample_adjust(denoiser, x, y, ps)
    assert res.iterations == 0 and res.x == x


def test_analysis_ops():
    # chi density: d=1 closed form
    expected = math.log(math.sqrt(2.0 / math.pi) * math.exp(-0.5))
    assert math.isclose(bl.chi_log_density(1.0, 1), expected, rel_tol=1e-12)

    jsd = bl.norm_distribution_jsd([1.0, 1.1, 1.2], [5.0, 5.1, 5.2], bins=8)
    assert math.isclose(jsd.jsd, math.log(2.0), rel_tol=1e-12)
    assert bl.norm_distribution_jsd([1.0, 2.0], [1.0, 2.0], bins=8).jsd == 0.0


def test_train_and_serialize(world, schedule, tmp_path):
    ds = bl.sample_dataset(world, 60, 30, seed=2)
    tc = bl.TrainConfig()
    tc.steps = 120
    tc.batch = 16
    result = bl.train_mlp(world, ds, schedule, tc)
    assert result.final_holdout_loss < result.initial_holdout_loss

    path = str(tmp_path / "model.json")
    result.model.save_json(path)
    loaded = bl.MlpDenoiser.load_json(path)
    x = [0.25, -0.5]
    assert loaded.eval(x, 3, 1) == result.model.eval(x, 3, 1)


def test_experiment_from_config(tmp_path):
    config_dir = os.environ.get("BASINLAB_CONFIG_DIR")
    if not config_dir:
        pytest.skip("BASINLAB_CONFIG_DIR not set")
    cfg = bl.load_config(os.path.join(config_dir, "analytic_quick.toml"))
    cfg.out_dir = str(tmp_path / "quick")
    report = bl.run_experiment(cfg)
    assert len(report.rows) == 5
    assert all(row.error == "" for row in report.rows)
    assert all(row.evals == 2 * 25 for row in report.rows)
    assert (tmp_path / "quick" / "runs.csv").exists()
    assert (tmp_path / "quick" / "metrics.csv").exists()
