import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsdfm import montecarlo as mc
from nsdfm.errors import ConfigError, EstimationError
from nsdfm.montecarlo import (
    ExperimentConfig,
    gen_params,
    mse_table,
    report_csv,
    report_json,
    run_cell,
    run_experiment,
    simulate_panel,
    true_irf,
)


@pytest.fixture(scope="module")
def params():
    return gen_params(50, 4, 3, 3, seed=0)


# parameters

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_param_invariants(seed, c):
    p = gen_params(12, 4, 3, c, seed=seed)
    assert np.max(np.abs(np.linalg.eigvals(p.U1))) == pytest.approx(0.6, abs=1e-8)
    np.testing.assert_allclose(p.R.T @ p.R, np.eye(3), atol=1e-10)
    assert np.linalg.matrix_rank(p.K) == 3
    kk = np.linalg.eigvalsh(p.K.T @ p.K)
    assert np.all((kk >= 0.64) & (kk <= 1.44))
    # a common rescaling keeps every diagonal entry above every off-diagonal one
    off = p.U1[~np.eye(4, dtype=bool)]
    assert off.min() >= 0 and np.diag(p.U1).min() > off.max()


def test_companion_single_unit_root(params):
    ev = np.linalg.eigvals(params.companion())
    assert np.sum(np.abs(ev - 1.0) < 1e-8) == 1
    # the remaining roots are those of U1 and zeros
    assert np.sort(np.abs(ev))[-2] <= 0.6 + 1e-8


@pytest.mark.parametrize("c", [1, 2, 3])
def test_unit_roots_equal_trends(c):
    p = gen_params(10, 4, 3, c, seed=4)
    ev = np.linalg.eigvals(p.companion())
    assert np.sum(np.abs(ev - 1.0) < 1e-6) == 4 - c


def test_var_coefs_factorization(params):
    # (I - U1 z) diag((1 - z) I_tau, I_c) expanded at a random z
    z = 0.37
    E = np.diag([1.0, 0.0, 0.0, 0.0])
    M = np.eye(4) - z * E
    lhs = (np.eye(4) - z * params.U1) @ M
    A = params.var_coefs
    np.testing.assert_allclose(lhs, np.eye(4) - z * A[0] - z**2 * A[1], atol=1e-14)


def test_params_deterministic():
    a, b = gen_params(30, seed=7), gen_params(30, seed=7)
    for f in ("loadings", "U1", "K", "R"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.loadings, gen_params(30, seed=8).loadings)


@pytest.mark.parametrize("kw", [dict(c=4), dict(q=5), dict(q=0), dict(n=2)])
def test_params_errors(kw):
    args = dict(n=20, r=4, q=3, c=3, seed=0)
    args.update(kw)
    with pytest.raises(ConfigError):
        gen_params(**args)


# true IRF

def test_true_irf_impact_zeros(params):
    phi = true_irf(params, 5)
    np.testing.assert_allclose(phi[:, :, 0], params.loadings @ params.K @ params.R, atol=1e-12)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert abs(phi[i, j, 0]) <= 1e-10


def test_true_irf_converges(params):
    phi = true_irf(params, 260)
    assert np.abs(np.diff(phi[:, :, 200:], axis=2)).max() < 1e-6


def test_true_irf_long_run_rank_one(params):
    lr = true_irf(params, 300)[:, :, 300]
    s = np.linalg.svd(lr, compute_uv=False)
    assert s[1] < 1e-6 * s[0]
    assert np.all(np.abs(lr @ np.linalg.svd(lr)[2][0]) > 1e-8)  # generic loadings load on the trend


# simulation

def test_simulation_shapes_and_start(params):
    sim = simulate_panel(params, 80, 20, horizon=7, seed=3)
    assert sim.panel.values.shape == (50, 81)
    assert np.all(sim.panel.values[:, 0] == 0)
    assert sim.true_irf.shape == (50, 3, 8)
    assert np.sum(sim.rho == 1) == 20 and np.all(sim.rho[:20] == 1)
    assert np.all((sim.d_coef >= 0) & (sim.d_coef <= 0.5))


def test_simulation_deterministic(params):
    a = simulate_panel(params, 60, 10, seed=5).panel.values
    b = simulate_panel(params, 60, 10, seed=5).panel.values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, simulate_panel(params, 60, 10, seed=6).panel.values)


def test_idiosyncratic_share(params):
    sim = simulate_panel(params, 150, 25, seed=1)
    chi = params.loadings @ sim.factors
    xi = sim.panel.values - chi
    ratio = np.var(np.diff(xi, axis=1), axis=1) / np.var(np.diff(chi, axis=1), axis=1)
    np.testing.assert_allclose(ratio, 0.5, rtol=1e-10)


def test_factors_follow_var(params):
    sim = simulate_panel(params, 40, 0, seed=2)
    F = sim.factors
    A = params.var_coefs
    w = F[:, 2:] - A[0] @ F[:, 1:-1] - A[1] @ F[:, :-2]
    # innovations live in the q-dimensional column space of K R
    KR = params.K @ params.R
    resid = w - KR @ np.linalg.lstsq(KR, w, rcond=None)[0]
    assert np.abs(resid).max() < 1e-10


def test_stationary_idiosyncratic_when_m_zero():
    p = gen_params(30, seed=0)
    v = []
    for T in (200, 800, 3200):
        sim = simulate_panel(p, T, 0, seed=1)
        v.append(np.var(sim.panel.values - p.loadings @ sim.factors, axis=1))
    v = np.array(v)
    # an I(1) series would grow about 16-fold from T = 200 to T = 3200
    assert np.all(v[2] / v[0] < 4.0)


def test_integrated_idiosyncratic_grows():
    p = gen_params(30, seed=0)
    v = []
    for T in (200, 3200):
        sim = simulate_panel(p, T, 30, seed=1)
        v.append(np.var(sim.panel.values - p.loadings @ sim.factors, axis=1).mean())
    assert v[1] / v[0] > 4.0


def _eigen_slopes(n_grid=(50, 100, 200), reps=10, T=400):
    ev = []
    for n in n_grid:
        p = gen_params(n, 4, 3, 3, seed=0)
        vals = [np.linalg.eigvalsh(np.cov(np.diff(simulate_panel(p, T, n // 2, seed=h).panel.values, axis=1)))[::-1][:4]
                for h in range(reps)]
        ev.append(np.mean(vals, axis=0))
    ev = np.log(np.array(ev))
    return np.array([np.polyfit(np.log(n_grid), ev[:, j], 1)[0] for j in range(4)])


@pytest.fixture(scope="module")
def eigen_slopes():
    return _eigen_slopes()


@pytest.mark.slow
def test_leading_eigenvalues_grow_with_n(eigen_slopes):
    assert np.all(np.abs(eigen_slopes[:3] - 1.0) <= 0.3)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the fourth factor difference has variance near 0.04 under this draw and is "
                                       "still below the largest idiosyncratic eigenvalue at n = 200")
def test_fourth_eigenvalue_grows_with_n(eigen_slopes):
    assert abs(eigen_slopes[3] - 1.0) <= 0.3


def test_simulation_bad_m(params):
    with pytest.raises(ConfigError):
        simulate_panel(params, 50, 51)


# MSE

def test_mse_zero_and_unit(params):
    truth = true_irf(params, 20)
    assert all(v == 0 for v in mse_table([truth, truth], truth).values())
    out = mse_table([truth + 1.0], truth)
    assert set(out) == {0, 1, 4, 8, 12, 16, 20}
    assert all(v == pytest.approx(1.0) for v in out.values())


def test_mse_counts_replications(params):
    truth = true_irf(params, 4)
    out = mse_table([truth + 2.0, truth], truth, horizons=(0, 4))
    assert out == {0: pytest.approx(2.0), 4: pytest.approx(2.0)}


def test_mse_errors(params):
    truth = true_irf(params, 4)
    with pytest.raises(ValueError):
        mse_table([], truth)
    with pytest.raises(ValueError):
        mse_table([truth[:-1]], truth, horizons=(0,))
    with pytest.raises(ValueError):
        mse_table([truth], truth, horizons=(0, 5))


# experiments

def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(cells=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(cells=[(50, 20, 30)])
    with pytest.raises(ConfigError):
        ExperimentConfig(cells=[(50, 20, 5)], pipeline="bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig(cells=[(50, 20, 5)], reps=0)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"cells": [[50, 20, 5]], "color": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"reps": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"cells": [[50, 20]]})


def test_experiment_deterministic_and_reported():
    cfg = {"cells": [[60, 30, 10]], "reps": 4, "pipeline": "vecm", "name": "tiny"}
    a = run_experiment(cfg, seed=2)
    b = run_experiment(cfg, seed=2)
    c = ExperimentConfig.from_dict(cfg)
    assert report_csv(c, a) == report_csv(c, b)
    assert report_json(c, a, 2) == report_json(c, b, 2)
    assert report_json(c, a, 2) != report_json(c, run_experiment(cfg, seed=3), 3)
    lines = report_csv(c, a).splitlines()
    assert lines[0] == "T,n,m,k=0,k=1,k=4,k=8,k=12,k=16,k=20,reps,failed"
    assert lines[1].startswith("60,30,10,")
    d = json.loads(report_json(c, a, 2))
    assert d["cells"][0]["reps"] == 4 and set(d["cells"][0]["mse"]) == {"0", "1", "4", "8", "12", "16", "20"}


def test_selection_report_layout():
    cfg = ExperimentConfig(cells=[(60, 30, 10)], reps=2, pipeline="selection", penalty=1.0)
    res = run_experiment(cfg)
    lines = report_csv(cfg, res).splitlines()
    assert lines[0] == "T,n,m,tau_correct_pct,q_correct_pct,reps,failed"
    assert 0.0 <= res[0].pct_q <= 100.0 and 0.0 <= res[0].pct_tau <= 100.0


def test_cell_aborts_on_failures(monkeypatch):
    calls = {"n": 0}

    def flaky(*a, **k):
        calls["n"] += 1
        raise EstimationError("forced")

    monkeypatch.setattr(mc, "estimate", flaky)
    cfg = ExperimentConfig(cells=[(50, 20, 5)], reps=3)
    res = run_cell(cfg, 50, 20, 5, 0)
    assert calls["n"] == 3 and res.failed == 3
    assert res.aborted and "failed" in res.aborted
    assert res.mse == {}
    assert json.loads(report_json(cfg, [res], 0))["cells"][0]["aborted"] == res.aborted
