"""Simulation design for I(1) factor panels with a singular, cointegrated factor VAR.

Factors follow ``A(L) F_t = K R u_t`` with
``A(L) = (I - U1 L) diag((1 - L) I_{r-c}, I_c)``, i.e. a VAR(2) with
``r - c`` unit roots. Idiosyncratic terms are ``(1 - rho_i L) xi_it =
sum_k d_i^k eps_{i,t-k}`` with Toeplitz ``0.5^{|i-j|}`` cross-correlation.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, EstimationError, NsdfmError
from .irf import invert_polynomial, recursive_rotation
from .panel import Panel
from .pipeline import EstimationSettings, estimate
from .rng import stream

logger = logging.getLogger(__name__)

TABLE1_HORIZONS = (0, 1, 4, 8, 12, 16, 20)
CROSS_CORR = 0.5
IDIO_TO_COMMON = 0.5  # Var(d xi) / Var(d chi): idiosyncratic share one third of Var(d x)


@dataclass(frozen=True)
class DgpParams:
    """Parameters drawn once per experiment (per cross-section size)."""

    loadings: np.ndarray  # (n, r)
    U1: np.ndarray  # (r, r), spectral radius 0.6
    K: np.ndarray  # (r, q)
    R: np.ndarray  # (q, q)
    c: int

    @property
    def n(self) -> int:
        return self.loadings.shape[0]

    @property
    def r(self) -> int:
        return self.U1.shape[0]

    @property
    def q(self) -> int:
        return self.K.shape[1]

    @property
    def tau(self) -> int:
        return self.r - self.c

    @property
    def var_coefs(self) -> np.ndarray:
        """``A_1 = U1 + E``, ``A_2 = -U1 E`` with ``E = diag(I_{r-c}, 0)``."""
        E = np.zeros((self.r, self.r))
        E[: self.tau, : self.tau] = np.eye(self.tau)
        return np.stack([self.U1 + E, -self.U1 @ E])

    def companion(self) -> np.ndarray:
        A = self.var_coefs
        r = self.r
        top = np.hstack([A[0], A[1]])
        bottom = np.hstack([np.eye(r), np.zeros((r, r))])
        return np.vstack([top, bottom])


@dataclass
class SimOutput:
    panel: Panel
    true_irf: np.ndarray  # (n, q, H + 1)
    params: DgpParams
    seed: int
    factors: np.ndarray  # (r, T + 1)
    rho: np.ndarray
    d_coef: np.ndarray
    idio_scale: np.ndarray


def _haar_orthogonal(r: int, rng) -> np.ndarray:
    z = rng.standard_normal((r, r))
    Q, Rm = np.linalg.qr(z)
    return Q * np.sign(np.diag(Rm))


def gen_params(n: int, r: int = 4, q: int = 3, c: int = 3, seed: int = 0) -> DgpParams:
    """Draw loadings, ``U1``, ``K`` and the calibrated rotation ``R``.

    ``R`` makes the impact responses of variables ``1..q`` lower triangular.
    """
    if not 0 <= c < r or not 1 <= q <= r:
        raise ConfigError(f"need c < r and 1 <= q <= r (r={r}, q={q}, c={c})")
    if n < q:
        raise ConfigError("need at least q series to calibrate the recursive rotation")
    rng = stream(seed, "params", n, r, q, c)
    loadings = rng.standard_normal((n, r))
    U1 = rng.uniform(0.0, 0.3, size=(r, r))
    U1[np.diag_indices(r)] = rng.uniform(0.5, 0.8, size=r)
    U1 *= 0.6 / np.max(np.abs(np.linalg.eigvals(U1)))
    while True:
        Kcheck = _haar_orthogonal(r, rng)
        ktilde = np.zeros(r)
        ktilde[:q] = rng.uniform(0.8, 1.2, size=q)
        K = (Kcheck * np.sqrt(ktilde))[:, :q]
        if np.linalg.matrix_rank(K) == q:
            break
    R = recursive_rotation(loadings[:q] @ K)
    return DgpParams(loadings, U1, K, R, c)


def true_irf(params: DgpParams, horizon: int) -> np.ndarray:
    """``phi_ijk = lambda_i' B_k (K R)_j`` from the true VAR(2) polynomial."""
    B = invert_polynomial(params.var_coefs, horizon)
    return np.einsum("ia,kab,bj->ijk", params.loadings, B, params.K @ params.R)


def simulate_panel(params: DgpParams, T: int, m: int, horizon: int = 20, seed: int = 0,
                   rng: np.random.Generator | None = None) -> SimOutput:
    """One replication of length ``T + 1`` (periods ``0..T``) with ``x_0 = 0``.

    The first ``m`` idiosyncratic components are I(1). Shocks, ``eps`` and the
    MA coefficients ``d_i`` are drawn here; everything else comes from
    ``params``.
    """
    n, r, q = params.n, params.r, params.q
    if not 0 <= m <= n:
        raise ConfigError(f"m={m} must lie in 0..n={n}")
    if rng is None:
        rng = stream(seed, "simulate", n, T, m)
    u = rng.standard_normal((T, q))
    F = kernels.var_simulate(params.var_coefs, u @ (params.K @ params.R).T).T
    eta = rng.standard_normal((T, n))
    eps = kernels.cross_section_ar(eta, CROSS_CORR)
    d = rng.uniform(0.0, 0.5, size=n)
    rho = np.zeros(n)
    rho[:m] = 1.0
    xi = kernels.idio_filter(eps, d, rho).T
    chi = params.loadings @ F
    v_chi = np.var(np.diff(chi, axis=1), axis=1)
    v_xi = np.var(np.diff(xi, axis=1), axis=1)
    scale = np.sqrt(IDIO_TO_COMMON * v_chi / v_xi)
    x = chi + xi * scale[:, None]
    panel = Panel(x, [f"x{i + 1}" for i in range(n)], [1] * n)
    return SimOutput(panel, true_irf(params, horizon), params, seed, F, rho, d, scale)


def mse_table(estimates, truth: np.ndarray, horizons=TABLE1_HORIZONS) -> dict:
    """``MSE(k)``: squared error averaged over variables, shocks and replications."""
    truth = np.asarray(truth)
    est = [np.asarray(getattr(e, "coeffs", e)) for e in estimates]
    if not est:
        raise ValueError("no estimates")
    H = max(horizons)
    for e in est:
        if e.shape[:2] != truth.shape[:2] or e.shape[2] <= H or truth.shape[2] <= H:
            raise ValueError(f"shape mismatch: estimate {e.shape}, truth {truth.shape}")
    sq = np.stack([(e[:, :, list(horizons)] - truth[:, :, list(horizons)]) ** 2 for e in est])
    n, q = truth.shape[:2]
    per_k = sq.sum(axis=(0, 1, 2)) / (len(est) * n * q)
    return {int(k): float(v) for k, v in zip(horizons, per_k)}


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    """Grid of ``(T, n, m)`` cells and what to run on each.

    ``pipeline`` is ``vecm``, ``var`` or ``selection``.
    """

    cells: list
    reps: int = 100
    pipeline: str = "vecm"
    horizons: tuple = TABLE1_HORIZONS
    r: int = 4
    q: int = 3
    tau: int = 1
    lags: int | None = None
    penalty: object = "tune"
    q_max: int = 6
    tau_max: int = 3
    name: str = "experiment"
    max_fail_frac: float = 0.05

    def __post_init__(self):
        self.cells = [tuple(int(v) for v in c) for c in self.cells]
        if not self.cells:
            raise ConfigError("experiment grid is empty")
        if self.pipeline not in ("vecm", "var", "selection"):
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.reps < 1:
            raise ConfigError("reps must be positive")
        for T, n, m in self.cells:
            if m > n:
                raise ConfigError(f"cell (T={T}, n={n}, m={m}) has m > n")
        self.horizons = tuple(int(h) for h in self.horizons)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known - {"seed"}
        if extra:
            raise ConfigError(f"unknown experiment keys: {sorted(extra)}")
        if "cells" not in d:
            raise ConfigError("experiment config needs a 'cells' list of [T, n, m] triples")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from None


@dataclass
class CellResult:
    T: int
    n: int
    m: int
    reps: int
    failed: int
    mse: dict = field(default_factory=dict)
    pct_tau: float | None = None
    pct_q: float | None = None
    aborted: str | None = None
    seconds: float = 0.0


def run_cell(cfg: ExperimentConfig, T: int, n: int, m: int, seed: int) -> CellResult:
    from .selection import select_q_tau

    t0 = time.perf_counter()
    c = cfg.r - cfg.tau
    params = gen_params(n, cfg.r, cfg.q, c, seed)
    H = max(cfg.horizons) if cfg.horizons else 0
    truth = true_irf(params, H)
    settings = None
    if cfg.pipeline != "selection":
        settings = EstimationSettings(r=cfg.r, q=cfg.q, tau=cfg.tau, dynamics=cfg.pipeline, p=cfg.lags,
                                      intercept=True, detrend=None, identify="recursive",
                                      order=tuple(range(cfg.q)), horizon=H, lr_horizon=H)
    estimates, hits_tau, hits_q, failed = [], 0, 0, 0
    for h in range(cfg.reps):
        rng = stream(seed, "replicate", T, n, m, h)
        sim = simulate_panel(params, T, m, H, rng=rng)
        try:
            if settings is not None:
                estimates.append(estimate(sim.panel.values, settings).irf.coeffs)
            else:
                res = select_q_tau(sim.panel.values, q_max=cfg.q_max, tau_max=cfg.tau_max, penalty=cfg.penalty)
                hits_q += res.q_hat == cfg.q
                hits_tau += res.tau_hat == cfg.tau
        except (NsdfmError, np.linalg.LinAlgError) as exc:
            failed += 1
            logger.debug("cell (%d, %d, %d) replicate %d failed: %s", T, n, m, h, exc)
    out = CellResult(T, n, m, cfg.reps, failed)
    if failed > cfg.max_fail_frac * cfg.reps:
        out.aborted = f"{failed} of {cfg.reps} replicates failed"
    elif settings is not None:
        out.mse = mse_table(estimates, truth, cfg.horizons)
    else:
        ok = cfg.reps - failed
        out.pct_tau = 100.0 * hits_tau / ok
        out.pct_q = 100.0 * hits_q / ok
    out.seconds = time.perf_counter() - t0
    return out


def run_experiment(config, seed: int = 0) -> list:
    """Run every cell; results are a deterministic function of ``(config, seed)``."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    results = []
    for T, n, m in cfg.cells:
        res = run_cell(cfg, T, n, m, seed)
        logger.info("cell T=%d n=%d m=%d done in %.1fs", T, n, m, res.seconds)
        results.append(res)
    return results


def report_csv(cfg: ExperimentConfig, results) -> str:
    """Table layout: ``T, n, m`` then ``k=...`` MSE columns or percent-correct columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if cfg.pipeline == "selection":
        w.writerow(["T", "n", "m", "tau_correct_pct", "q_correct_pct", "reps", "failed"])
        for r in results:
            w.writerow([r.T, r.n, r.m, _fmt(r.pct_tau), _fmt(r.pct_q), r.reps, r.failed])
    else:
        w.writerow(["T", "n", "m", *(f"k={k}" for k in cfg.horizons), "reps", "failed"])
        for r in results:
            w.writerow([r.T, r.n, r.m, *(_fmt(r.mse.get(k), 3) for k in cfg.horizons), r.reps, r.failed])
    return buf.getvalue()


def report_json(cfg: ExperimentConfig, results, seed: int) -> str:
    cells = []
    for r in results:
        d = {"T": r.T, "n": r.n, "m": r.m, "reps": r.reps, "failed": r.failed, "aborted": r.aborted}
        if cfg.pipeline == "selection":
            d.update(tau_correct_pct=r.pct_tau, q_correct_pct=r.pct_q)
        else:
            d["mse"] = {str(k): v for k, v in r.mse.items()}
        cells.append(d)
    return json.dumps({"name": cfg.name, "pipeline": cfg.pipeline, "seed": seed, "cells": cells}, indent=2)


def _fmt(v, digits=1):
    return "" if v is None else f"{v:.{digits}f}"
