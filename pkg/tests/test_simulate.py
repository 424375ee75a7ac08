import numpy as np
import pytest

from kmdr import (
    DgpSpec,
    InputError,
    calibrate_censoring,
    generate,
    population_grid,
    run_experiment,
    true_adme,
    true_cdf,
)
from kmdr.simulate import _draw_duration


def test_duration_transform_matches_conditional_cdf():
    # at a fixed covariate slice, the simulated durations follow the stated law
    rng = np.random.default_rng(1)
    n = 100_000
    for dgp, xv in [(1, 0.3), (2, 0.7), (3, 0.5)]:
        u = 1 - rng.random(n)
        t = _draw_duration(dgp, u, np.full(n, xv))
        qs = np.quantile(t, [0.1, 0.25, 0.5, 0.75, 0.9])
        for q, level in zip(qs, [0.1, 0.25, 0.5, 0.75, 0.9]):
            assert float(true_cdf(dgp, float(q), xv)) == pytest.approx(level, abs=0.01)


def test_dgp3_zero_covariate_is_unit_exponential():
    rng = np.random.default_rng(2)
    u = 1 - rng.random(200_000)
    t = _draw_duration(3, u, np.zeros(200_000))
    for tv in (0.2, 1.0, 2.5):
        assert np.mean(t <= tv) == pytest.approx(1 - np.exp(-tv), abs=0.005)


def test_generate_no_censoring_all_events():
    s = generate(DgpSpec(dgp_id=1, n=500, censoring_pct=0, seed=3))
    assert s.delta.all()
    assert s.n == 500 and s.k == 1


def test_generate_realized_censoring_near_target():
    for dgp in (1, 2, 3):
        for pct in (10, 30):
            s = generate(DgpSpec(dgp_id=dgp, n=100_000, censoring_pct=pct, seed=4))
            realized = 100.0 * (1 - s.delta.mean())
            assert abs(realized - pct) < 2.0


def test_generate_deterministic():
    a = generate(DgpSpec(dgp_id=2, n=50, censoring_pct=10, seed=5))
    b = generate(DgpSpec(dgp_id=2, n=50, censoring_pct=10, seed=5))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.delta, b.delta)


def test_calibration_monotone_and_sentinel():
    assert calibrate_censoring(1, 0) == (0.0, np.inf)
    for dgp in (1, 2, 3):
        a10, b10 = calibrate_censoring(dgp, 10)
        a30, b30 = calibrate_censoring(dgp, 30)
        assert a10 == 0.0 and a30 == 0.0
        assert b30 < b10
    with pytest.raises(InputError):
        calibrate_censoring(1, 20)


def test_true_adme_values():
    assert true_adme(3, 1.0) == pytest.approx(0.0, abs=1e-10)
    assert true_adme(2, 0.9) < 0
    assert true_adme(2, 1.5) < 0
    # cross-check the quadrature against averaged central differences
    for dgp, t in [(1, 0.9), (2, 1.2), (3, 0.6)]:
        h = 1e-5
        xs = np.linspace(h, 1 - h, 4001)
        fd = (true_cdf(dgp, t, xs + h) - true_cdf(dgp, t, xs - h)) / (2 * h)
        assert true_adme(dgp, t) == pytest.approx(float(np.trapezoid(fd, xs)), abs=1e-4)


def test_population_grid_cached_and_sane():
    g1 = population_grid(1)
    g2 = population_grid(1)
    assert g1 is g2
    assert g1.size == 100
    assert (np.diff(g1) > 0).all()
    steps = np.diff(g1)
    assert np.allclose(steps, steps[0])


def test_run_experiment_deterministic_and_worker_invariant():
    spec = DgpSpec(dgp_id=3, n=120, censoring_pct=0, seed=11)
    r1 = run_experiment(spec, reps=4, estimators=("dr_cll", "ph"))
    r2 = run_experiment(spec, reps=4, estimators=("dr_cll", "ph"))
    r3 = run_experiment(spec, reps=4, estimators=("dr_cll", "ph"), n_workers=3)
    assert r1.to_dict() == r2.to_dict() == r3.to_dict()


def test_run_experiment_report_shape_and_aggregates():
    spec = DgpSpec(dgp_id=1, n=150, censoring_pct=10, seed=12)
    rep = run_experiment(spec, reps=6)
    assert set(rep.estimators) == {"dr_cll", "dr_l", "ph"}
    for m in rep.estimators.values():
        assert np.isfinite([m.avg_abs_bias_cdf, m.rmse_cdf,
                            m.avg_abs_bias_adme, m.rmse_adme]).all()
        # per-threshold RMSE dominates |bias|, so the averages inherit the order
        assert m.rmse_cdf >= m.avg_abs_bias_cdf
        assert m.rmse_adme >= m.avg_abs_bias_adme
        assert m.failed_reps == 0
    d = rep.to_dict()
    assert d["dgp"] == 1 and d["grid_size"] == 100 and not d["flagged"]


def test_run_experiment_validates_inputs():
    spec = DgpSpec(dgp_id=1, n=50, censoring_pct=0, seed=1)
    with pytest.raises(InputError):
        run_experiment(spec, reps=1)
    with pytest.raises(InputError):
        run_experiment(spec, reps=3, estimators=("nope",))
    with pytest.raises(InputError):
        DgpSpec(dgp_id=4, n=50, censoring_pct=0, seed=1)
    with pytest.raises(InputError):
        DgpSpec(dgp_id=1, n=50, censoring_pct=20, seed=1)
