"""Information criteria for the numbers of factors, shocks and common trends.

``r`` comes from the eigenvalues of the covariance of differences, ``q``
from the dynamic eigenvalues averaged over frequencies and ``tau`` from the
dynamic eigenvalues at frequency zero. Then ``d = q - tau`` and ``c = r - tau``.

The penalty shapes ``s(n, T)`` and ``p(n, T)`` below are conventions chosen
to meet the usual consistency conditions; any positive multiple is
admissible, which is what :func:`tune_penalty` scans over.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SelectionError
from .panel import as_matrix
from .spectral import SpectralDensity, default_bandwidth, dynamic_eigenvalues, lag_window_spectrum

DEFAULT_C_GRID = tuple(np.round(np.arange(0.02, 3.0001, 0.02), 4))
DEFAULT_FRACTIONS = (0.6, 0.7, 0.8, 0.9, 1.0)


def q_penalty(n: int, T: int, bandwidth: int) -> float:
    """``s(n, T) = log(m) / m`` with ``m = min(n, B^2, sqrt(T / B))``."""
    m = min(n, bandwidth**2, math.sqrt(T / bandwidth))
    return math.log(m) / m


def tau_penalty(n: int, T: int, bandwidth: int) -> float:
    """``((B log B / T)^{1/2} + 1/n) log(min((T / (B log B))^{1/2}, n))``."""
    blb = bandwidth * math.log(bandwidth) if bandwidth > 1 else math.log(2.0)
    return (math.sqrt(blb / T) + 1.0 / n) * math.log(min(math.sqrt(T / blb), n))


@dataclass
class CriterionPath:
    """Values of one criterion over candidates ``k = 0..k_max``."""

    fit: np.ndarray  # log of the unexplained-variance term
    penalty: float  # per-unit penalty before the constant
    penalty_c: float

    @property
    def values(self) -> np.ndarray:
        return self.fit + np.arange(len(self.fit)) * self.penalty_c * self.penalty

    @property
    def selected(self) -> int:
        return int(np.argmin(self.values))

    def select(self, penalty_c: float) -> int:
        return int(np.argmin(self.fit + np.arange(len(self.fit)) * penalty_c * self.penalty))


def _tail_log(eigs: np.ndarray, k_max: int, norm: float) -> np.ndarray:
    """``log(sum_{j > k} eigs_j / norm)`` for ``k = 0..k_max``; ``eigs`` descending."""
    tails = np.cumsum(eigs[::-1])[::-1]  # tails[k] = sum_{j >= k}
    with np.errstate(divide="ignore"):
        return np.log(np.clip(tails[: k_max + 1], 0.0, None) / norm)


# ---------------------------------------------------------------------------
# r


def estimate_r(diffs, r_max: int, method: str = "ic"):
    """Number of static factors from the standardized differenced panel.

    ``ic``: minimize ``log V(k) + k (n + T)/(nT) log min(n, T)``, ``k = 0..r_max``.
    ``er``: maximize ``mu_k / mu_{k+1}``, ``k = 1..r_max``.
    Returns ``(r_hat, paths)`` where ``paths`` holds both criteria; ``r_hat``
    follows ``method``.
    """
    d = as_matrix(diffs)
    n, T = d.shape
    if not 1 <= r_max < min(n, T):
        raise ValueError(f"r_max={r_max} must lie in 1..min(n, T) - 1")
    sd = d.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise SelectionError("a differenced series is constant; cannot standardize")
    z = (d - d.mean(axis=1, keepdims=True)) / sd
    mu = np.linalg.eigvalsh(z @ z.T / T)[::-1]
    mu = np.where(mu > 64 * n * np.finfo(float).eps * mu[0], mu, 0.0)  # numerical rank
    if mu[0] - mu[min(n, T) - 1] <= 1e-10 * mu[0]:
        raise SelectionError("all covariance eigenvalues are equal; check the data")
    v = _tail_log(mu, r_max, n)
    ic = v + np.arange(r_max + 1) * (n + T) / (n * T) * math.log(min(n, T))
    ratios = mu[:r_max] / np.maximum(mu[1: r_max + 1], 1e-300 * mu[0])
    r_ic = int(np.argmin(ic))
    r_er = int(np.argmax(ratios)) + 1
    paths = {"ic": ic, "eigenvalue_ratio": ratios, "eigenvalues": mu[: r_max + 1], "r_ic": r_ic, "r_er": r_er}
    if method == "ic":
        return r_ic, paths
    if method == "er":
        return r_er, paths
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# q and tau


def q_criterion(sd: SpectralDensity, q_max: int, n_obs: int) -> CriterionPath:
    ev = np.clip(dynamic_eigenvalues(sd), 0.0, None)
    n = ev.shape[1]
    if not 0 <= q_max < n:
        raise ValueError(f"q_max={q_max} must be below n={n}")
    total = ev.sum(axis=0)  # sum over frequencies, per rank j
    fit = _tail_log(total, q_max, n * ev.shape[0])
    return CriterionPath(fit, q_penalty(n, n_obs, sd.bandwidth), 1.0)


def tau_criterion(sd: SpectralDensity, tau_max: int, n_obs: int) -> CriterionPath:
    ev0 = np.clip(dynamic_eigenvalues(sd)[sd.zero_index], 0.0, None)
    n = ev0.shape[0]
    if not 0 <= tau_max < n:
        raise ValueError(f"tau_max={tau_max} must be below n={n}")
    fit = _tail_log(ev0, tau_max, n)
    return CriterionPath(fit, tau_penalty(n, n_obs, sd.bandwidth), 1.0)


def estimate_q(sd: SpectralDensity, q_max: int, penalty_c: float = 1.0, n_obs: int | None = None):
    """Hallin-Liska type criterion over the whole frequency grid. Returns ``(q_hat, path)``."""
    path = q_criterion(sd, q_max, n_obs or sd.n_obs)
    path.penalty_c = penalty_c
    return path.selected, path


def estimate_tau(sd: SpectralDensity, tau_max: int, penalty_c: float = 1.0, n_obs: int | None = None):
    """Zero-frequency criterion for the number of common trends. Returns ``(tau_hat, path)``."""
    path = tau_criterion(sd, tau_max, n_obs or sd.n_obs)
    path.penalty_c = penalty_c
    return path.selected, path


# ---------------------------------------------------------------------------
# penalty tuning


@dataclass
class TuningResult:
    penalty_c: float
    c_grid: np.ndarray
    selected: np.ndarray  # full-sample count per c
    stability: np.ndarray  # variance of counts across subsamples per c
    fallback: bool = False


def _stability_intervals(stab: np.ndarray):
    runs, start = [], None
    for i, v in enumerate(stab):
        if v == 0 and start is None:
            start = i
        elif v != 0 and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(stab) - 1))
    return runs


def tune_penalty(criterion: str, diffs, k_max: int, c_grid=DEFAULT_C_GRID, subsample_fractions=DEFAULT_FRACTIONS,
                 bandwidth_rule=default_bandwidth, kernel: str = "bartlett") -> TuningResult:
    """Scan the penalty constant over nested subsamples.

    For each fraction ``f`` about ``f n`` evenly spaced series over the first
    ``round(f T)`` periods are used, so that the composition of the panel does
    not drift with its ordering. For every ``c`` the count selected on
    each subsample is recorded; ``c*`` is the midpoint of the first
    zero-variance interval of ``c`` values, skipping the leading interval
    where the maximum candidate is selected (the trivial small-penalty
    regime). With a single interval its midpoint is used.
    """
    if criterion not in ("q", "tau"):
        raise ValueError("criterion must be 'q' or 'tau'")
    c_grid = np.asarray(c_grid, dtype=np.float64)
    if c_grid.size == 0 or np.any(np.diff(c_grid) <= 0):
        raise ValueError("c_grid must be non-empty and ascending")
    fracs = sorted(float(f) for f in subsample_fractions)
    if any(not 0 < f <= 1 for f in fracs):
        raise ValueError("subsample fractions must lie in (0, 1]")
    d = as_matrix(diffs)
    n, T = d.shape
    counts = []
    for f in fracs:
        nj, Tj = max(k_max + 2, round(f * n)), max(8, round(f * T))
        rows = np.unique(np.floor(np.arange(nj) * n / nj).astype(np.int64))
        sub = d[rows, :Tj]
        sd = lag_window_spectrum(sub, bandwidth_rule(Tj), kernel)
        path = q_criterion(sd, k_max, Tj) if criterion == "q" else tau_criterion(sd, k_max, Tj)
        counts.append([path.select(c) for c in c_grid])
    counts = np.asarray(counts)
    stab = counts.var(axis=0)
    full = counts[-1]
    runs = _stability_intervals(stab)
    if runs and len(runs) > 1 and full[runs[0][0]] == k_max:
        runs = runs[1:]
    if not runs:
        warnings.warn(f"no stability interval for the {criterion} criterion; using c = 1", RuntimeWarning)
        return TuningResult(1.0, c_grid, full, stab, fallback=True)
    lo, hi = runs[0]
    return TuningResult(0.5 * (c_grid[lo] + c_grid[hi]), c_grid, full, stab)


# ---------------------------------------------------------------------------
# everything together


@dataclass
class SelectionResult:
    r_hat: int
    q_hat: int
    tau_hat: int
    criterion_paths: dict = field(default_factory=dict)
    penalty_constant: dict = field(default_factory=dict)
    stability_path: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.tau_hat <= self.q_hat <= self.r_hat:
            raise SelectionError(f"inconsistent counts r={self.r_hat}, q={self.q_hat}, tau={self.tau_hat}")

    @property
    def d_hat(self) -> int:
        return self.q_hat - self.tau_hat

    @property
    def c_hat(self) -> int:
        return self.r_hat - self.tau_hat

    def summary(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "q_hat": self.q_hat,
            "tau_hat": self.tau_hat,
            "d_hat": self.d_hat,
            "c_hat": self.c_hat,
            "penalty_constant": self.penalty_constant,
            "warnings": self.warnings,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.summary(), **kw)

    def write_paths_csv(self, path) -> None:
        """One row per ``(criterion, k)`` with the criterion value."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["criterion", "k", "value"])
            for name, vals in self.criterion_paths.items():
                for k, v in enumerate(np.asarray(vals).ravel()):
                    w.writerow([name, k, repr(float(v))])

    def write_stability_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["criterion", "c", "selected", "variance"])
            for name, st in self.stability_path.items():
                for c, k, v in zip(st["c"], st["selected"], st["variance"]):
                    w.writerow([name, repr(float(c)), int(k), repr(float(v))])


def _resolve_penalty(criterion, d, k_max, penalty, result_pc, result_stab, msgs, **tune_kw):
    if isinstance(penalty, dict):
        penalty = penalty.get(criterion, "tune")
    if penalty == "tune":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tr = tune_penalty(criterion, d, k_max, **tune_kw)
        msgs.extend(str(w.message) for w in caught)
        result_pc[criterion] = float(tr.penalty_c)
        result_stab[criterion] = {"c": tr.c_grid.tolist(), "selected": tr.selected.tolist(),
                                  "variance": tr.stability.tolist()}
        return tr.penalty_c
    result_pc[criterion] = float(penalty)
    return float(penalty)


def select_q_tau(x, q_max: int = 6, tau_max: int = 3, penalty="tune", bandwidth: int | None = None,
                 kernel: str = "bartlett", r_cap: int | None = None, **tune_kw) -> SelectionResult:
    """``q`` and ``tau`` from a levels panel; ``r`` is set to ``q`` unless ``r_cap`` is given.

    ``penalty`` is ``"tune"``, a fixed constant, or a mapping such as
    ``{"q": "tune", "tau": 1.0}`` to treat the two criteria differently.
    """
    xm = as_matrix(x)
    d = np.diff(xm, axis=1)
    n, T = d.shape
    sd = lag_window_spectrum(d, bandwidth, kernel)
    pcs, stabs, msgs, paths = {}, {}, [], {}
    qm = min(q_max, n - 1) if r_cap is None else min(q_max, r_cap)
    cq = _resolve_penalty("q", d, qm, penalty, pcs, stabs, msgs, **tune_kw)
    q_hat, qp = estimate_q(sd, qm, cq)
    tm = min(tau_max, q_hat)
    if tm >= 1:
        ct = _resolve_penalty("tau", d, tm, penalty, pcs, stabs, msgs, **tune_kw)
        tau_hat, tp = estimate_tau(sd, tm, ct)
        paths["tau"] = tp.values
    else:
        tau_hat = 0
        paths["tau"] = np.zeros(1)
    paths["q"] = qp.values
    r_hat = r_cap if r_cap is not None else q_hat
    return SelectionResult(r_hat, q_hat, tau_hat, paths, pcs, stabs, msgs)


def select_all(x, r_max: int = 10, q_max: int | None = None, tau_max: int | None = None, penalty="tune",
               r_method: str = "ic", bandwidth: int | None = None, kernel: str = "bartlett",
               **tune_kw) -> SelectionResult:
    """``r`` by the eigenvalue criteria, then ``q <= r`` and ``tau <= q``."""
    xm = as_matrix(x)
    d = np.diff(xm, axis=1)
    r_hat, rp = estimate_r(d, min(r_max, min(d.shape) - 1), r_method)
    q_max = r_hat if q_max is None else min(q_max, r_hat)
    tau_max = q_max if tau_max is None else tau_max
    if r_hat == 0:
        res = SelectionResult(0, 0, 0, {"r_ic": rp["ic"]}, {}, {}, ["no common factors detected"])
        return res
    res = select_q_tau(xm, q_max, tau_max, penalty, bandwidth, kernel, r_cap=r_hat, **tune_kw)
    res.criterion_paths["r_ic"] = rp["ic"]
    res.criterion_paths["r_eigenvalue_ratio"] = rp["eigenvalue_ratio"]
    return res


def select_counts(x, r=None, q=None, tau=None, r_max: int = 10, q_max: int = 6, tau_max: int = 3, penalty="tune",
                  r_method: str = "ic", bandwidth: int | None = None, kernel: str = "bartlett",
                  **tune_kw) -> SelectionResult:
    """Fill in whichever of ``r``, ``q``, ``tau`` is ``None``; given counts are kept.

    Each estimated count is capped by the one above it in ``tau <= q <= r``.
    """
    xm = as_matrix(x)
    d = np.diff(xm, axis=1)
    n, T = d.shape
    paths, pcs, stabs, msgs = {}, {}, {}, []
    if r is None:
        r, rp = estimate_r(d, min(r_max, min(n, T) - 1), r_method)
        paths["r_ic"] = rp["ic"]
        paths["r_eigenvalue_ratio"] = rp["eigenvalue_ratio"]
        if r == 0:
            msgs.append("no common factors detected")
    need_spec = (q is None and r > 0) or (tau is None and (q is None or q > 0))
    sd = lag_window_spectrum(d, bandwidth, kernel) if need_spec else None
    if q is None:
        if r == 0:
            q = 0
        else:
            qm = min(q_max, r, n - 1)
            cq = _resolve_penalty("q", d, qm, penalty, pcs, stabs, msgs, **tune_kw)
            q, qp = estimate_q(sd, qm, cq)
            paths["q"] = qp.values
    if tau is None:
        tm = min(tau_max, q)
        if tm >= 1:
            ct = _resolve_penalty("tau", d, tm, penalty, pcs, stabs, msgs, **tune_kw)
            tau, tp = estimate_tau(sd, tm, ct)
            paths["tau"] = tp.values
        else:
            tau = 0
    return SelectionResult(int(r), int(q), int(tau), paths, pcs, stabs, msgs)
