"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import survdro


def two_group_data(n, seed, effect=3.0):
    rng = np.random.default_rng(seed)
    minority = rng.random(n) < 0.2
    minority[0] = False
    minority[1] = True
    x = rng.standard_normal((n, 2))
    direction = np.array([effect, 0.6 * effect])
    sign = np.where(minority, -1.0, 1.0)
    rate = np.exp(sign * (x @ direction))
    t = rng.exponential(1.0 / rate)
    c = rng.exponential(1.0 / 0.3, size=n)
    times = np.minimum(t, c)
    events = (t <= c).astype(np.int32)
    events[0] = 1
    events[2] = 0
    groups = {"group": ["minority" if m else "majority" for m in minority]}
    return survdro.Dataset(x, times, events, groups=groups), minority


def test_dual_solver_values():
    assert survdro.c_alpha(0.5) == pytest.approx(math.sqrt(3.0), abs=1e-12)
    assert survdro.c_alpha(1.0) == 1.0

    eta, value = survdro.solve_eta([0.0, 2.0], survdro.c_alpha(0.5))
    assert value == pytest.approx(2.0, abs=1e-8)
    assert eta == pytest.approx(2.0, abs=1e-6)

    _, mean = survdro.solve_eta([0.0, 1.0, 2.0, 3.0], survdro.c_alpha(1.0))
    assert mean == pytest.approx(1.5)

    assert survdro.dro_objective([1.0], 1.0, survdro.c_alpha(0.5)) == pytest.approx(1.0)


def test_dataset_roundtrip():
    ds, _ = two_group_data(50, 0)
    assert ds.n == 50
    assert ds.dim == 2
    assert 0.0 < ds.censoring_rate < 1.0

    with pytest.raises(survdro.SurvdroError):
        survdro.Dataset(np.zeros((2, 1)), np.array([-1.0, 1.0]), np.array([1, 0], dtype=np.int32))


def test_training_is_deterministic_and_improves():
    ds, _ = two_group_data(80, 1)
    model = survdro.train(ds, model="cox-linear", method="erm", optimizer="sgd",
                          lr=0.05, iterations=60, seed=3)
    again = survdro.train(ds, model="cox-linear", method="erm", optimizer="sgd",
                          lr=0.05, iterations=60, seed=3)
    assert np.array_equal(model.theta, again.theta)

    history = model.objective_history
    assert history[-1] < history[0]


def test_dro_training_and_metric_reports():
    train, _ = two_group_data(300, 7)
    test, _ = two_group_data(300, 8)
    erm = survdro.train(train, method="erm", optimizer="sgd", lr=0.1, iterations=150, seed=0)
    dro = survdro.train(train, method="dro", alpha=0.2, optimizer="sgd", lr=0.1,
                        iterations=150, seed=0)
    m_erm = survdro.evaluate(erm, test, group="group")
    m_dro = survdro.evaluate(dro, test, group="group")
    for key in ("ctd", "ibs", "ci_pct", "f_i", "f_g", "f_cap", "f_ci", "f_cg"):
        assert key in m_erm
        assert math.isfinite(m_dro[key])
    assert 0.0 <= m_erm["ctd"] <= 1.0
    # the robust objective pulls the fit away from the majority-only optimum
    assert np.linalg.norm(np.asarray(dro.theta)) < np.linalg.norm(np.asarray(erm.theta))


def test_survival_curves_are_monotone():
    ds, _ = two_group_data(60, 11)
    model = survdro.train(ds, method="erm", optimizer="sgd", lr=0.05, iterations=40, seed=5)
    grid, surv = model.survival(ds)
    assert len(grid) == surv.shape[1]
    assert surv.shape[0] == ds.n
    assert np.all(surv > 0.0) and np.all(surv <= 1.0)
    assert np.all(np.diff(surv, axis=1) <= 1e-12)


def test_deephit_and_split_paths():
    ds, _ = two_group_data(60, 13)
    deephit = survdro.train(ds, model="deephit", method="dro", alpha=0.5, lr=0.01,
                            iterations=10, seed=2, beta=0.6, sigma=0.5, grid_steps=6, hidden=8)
    metrics = survdro.evaluate(deephit, ds, group="group")
    assert 0.0 <= metrics["ctd"] <= 1.0

    split = survdro.train(ds, method="dro-split", alpha=0.3, optimizer="sgd", lr=0.05,
                          iterations=20, seed=2)
    exact = survdro.train(ds, method="dro-exact-cox", alpha=0.3, optimizer="sgd", lr=0.05,
                          iterations=20, seed=2)
    assert len(split.theta) == 2
    assert len(exact.baseline_log_hazard) > 0
