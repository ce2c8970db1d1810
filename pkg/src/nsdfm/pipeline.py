"""End-to-end estimation: detrend, factors, dynamics, identification, normalization."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, EstimationError, NsdfmError
from .factors import FactorModel, estimate_factors
from .irf import (
    DEFAULT_LR_HORIZON,
    IrfSet,
    identify_permanent,
    identify_recursive,
    invert_polynomial,
    normalize_irf,
    raw_irf,
)
from .panel import as_matrix, detrend
from .rng import stream
from .var import var_ls
from .vecm import estimate_K, johansen

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimationSettings:
    """Counts and choices for one pipeline run.

    ``p`` is the number of lagged differences for the VECM and the lag order
    for the levels VAR. ``order`` and ``normalize`` use row indices;
    ``normalize`` is ``(variable, horizon, target)`` and applies to
    ``normalize_shock``.
    """

    r: int
    q: int
    tau: int = 1
    dynamics: str = "vecm"
    p: int | None = None
    intercept: bool = True
    detrend: str | None = "ls"
    identify: str = "raw"
    order: tuple | None = None
    sign_variable: int = 0
    normalize: tuple | None = None
    normalize_shock: int = 0
    horizon: int = 20
    lr_horizon: int = DEFAULT_LR_HORIZON

    def __post_init__(self):
        if not 0 <= self.tau <= self.q <= self.r:
            raise ConfigError(f"counts must satisfy tau <= q <= r (got r={self.r}, q={self.q}, tau={self.tau})")
        if self.dynamics not in ("vecm", "var"):
            raise ConfigError(f"unknown dynamics {self.dynamics!r}")
        if self.identify not in ("raw", "recursive", "permanent"):
            raise ConfigError(f"unknown identification scheme {self.identify!r}")

    @property
    def c(self) -> int:
        return self.r - self.tau

    @property
    def lags(self) -> int:
        if self.p is not None:
            return self.p
        return 1 if self.dynamics == "vecm" else 2


@dataclass
class FitResult:
    irf: IrfSet
    factors: FactorModel
    dynamics: object
    x: np.ndarray
    trend: object = None
    warnings: list = field(default_factory=list)


def fit_dynamics(F: np.ndarray, settings: EstimationSettings):
    if settings.dynamics == "vecm":
        if settings.tau == 0:
            raise EstimationError("no common trends (tau=0): the VECM has full rank; use VAR dynamics")
        return johansen(F, p=settings.lags, c=settings.c, intercept=settings.intercept, q=settings.q)
    return var_ls(F, p=settings.lags, intercept=settings.intercept, q=settings.q)


def estimate(x, settings: EstimationSettings, variable_names=None) -> FitResult:
    """Run the full pipeline on a panel (or an ``n x (T + 1)`` array)."""
    trend = None
    if settings.detrend:
        trend, xd = detrend(as_matrix(x), settings.detrend)
    else:
        xd = as_matrix(x)
    fm = estimate_factors(xd, settings.r)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dyn, irf = factor_irf(fm.loadings, fm.factors, settings, variable_names)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return FitResult(irf, fm, dyn, xd, trend, [str(w.message) for w in caught])


def factor_irf(loadings, factors, settings: EstimationSettings, variable_names=None):
    """Fit dynamics on given factors and return ``(dynamics, identified IrfSet)``.

    The shock matrix is computed in the metric of ``loadings`` so the raw
    responses do not depend on how the factor space is rotated.
    """
    lam = np.atleast_2d(np.asarray(loadings, dtype=np.float64))
    dyn = fit_dynamics(np.atleast_2d(np.asarray(factors, dtype=np.float64)), settings)
    dyn = replace(dyn, K=estimate_K(dyn.residuals, settings.q, loadings=lam))
    B = invert_polynomial(dyn.var_coefs(), max(settings.horizon, settings.lr_horizon))
    irf = raw_irf(lam, B, dyn.K, settings.horizon, settings.dynamics, variable_names)
    return dyn, identify(irf, settings)


def identify(irf: IrfSet, settings: EstimationSettings) -> IrfSet:
    if settings.identify == "recursive":
        order = settings.order if settings.order is not None else tuple(range(settings.q))
        irf = identify_recursive(irf, order)
    elif settings.identify == "permanent":
        irf = identify_permanent(irf, settings.tau, settings.lr_horizon, settings.sign_variable)
    if settings.normalize is not None:
        var, k, target = settings.normalize
        irf = normalize_irf(irf, int(var), settings.normalize_shock, int(k), float(target))
    return irf


def _block_resample(d: np.ndarray, block: int, rng) -> np.ndarray:
    """Moving-block resample of the columns of ``d`` to the same length."""
    T = d.shape[1]
    n_blocks = math.ceil(T / block)
    starts = rng.integers(0, T - block + 1, size=n_blocks)
    idx = (starts[:, None] + np.arange(block)[None, :]).ravel()[:T]
    return d[:, idx]


def bootstrap_bands(x, settings: EstimationSettings, n_boot: int = 200, coverage: float = 0.68, seed: int = 0,
                    block_length: int | None = None, fit: FitResult | None = None):
    """Residual bootstrap of the whole pipeline.

    Factor innovations are drawn i.i.d. from the centred fitted residuals and
    fed through the fitted levels VAR from a zero start; idiosyncratic
    differences are moving-block resampled (default block ``ceil(T^{1/3})``)
    and cumulated from the fitted initial value. Each replicate re-runs
    extraction, dynamics, identification and normalization.

    Returns ``(lower, upper, n_failed)``.
    """
    if n_boot < 50:
        raise ConfigError("n_boot must be at least 50")
    if not 0 < coverage < 1:
        raise ConfigError("coverage must lie in (0, 1)")
    if fit is None:
        fit = estimate(x, settings)
    xd = fit.x
    n, T1 = xd.shape
    T = T1 - 1
    fm, dyn = fit.factors, fit.dynamics
    block = block_length or math.ceil(T ** (1.0 / 3.0))
    coefs = np.asarray(dyn.var_coefs())
    w = dyn.residuals - dyn.residuals.mean(axis=1, keepdims=True)
    xi = xd - fm.loadings @ fm.factors
    dxi = np.diff(xi, axis=1)
    boot_settings = _replicate_settings(settings)
    draws, failed = [], 0
    for b in range(n_boot):
        rng = stream(seed, "bootstrap", b)
        shocks = w[:, rng.integers(0, w.shape[1], size=T)].T
        F_star = kernels.var_simulate(coefs, shocks).T
        xi_star = np.empty_like(xi)
        xi_star[:, 0] = xi[:, 0]
        xi_star[:, 1:] = xi[:, [0]] + np.cumsum(_block_resample(dxi, block, rng), axis=1)
        x_star = fm.loadings @ F_star + xi_star
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                draws.append(estimate(x_star, boot_settings).irf.coeffs)
        except (NsdfmError, np.linalg.LinAlgError, ValueError) as exc:
            failed += 1
            logger.debug("bootstrap replicate %d failed: %s", b, exc)
    if failed > 0.1 * n_boot:
        raise EstimationError(f"{failed} of {n_boot} bootstrap replicates failed")
    stack = np.stack(draws)
    lo, hi = (1 - coverage) / 2, (1 + coverage) / 2
    return np.quantile(stack, lo, axis=0), np.quantile(stack, hi, axis=0), failed


def _replicate_settings(settings: EstimationSettings) -> EstimationSettings:
    # replicate panels are already trend-free
    return replace(settings, detrend=None)


def estimate_with_bands(x, settings: EstimationSettings, n_boot: int, coverage: float, seed: int,
                        variable_names=None) -> FitResult:
    fit = estimate(x, settings, variable_names)
    lower, upper, failed = bootstrap_bands(x, settings, n_boot, coverage, seed, fit=fit)
    fit.irf = replace(fit.irf, lower=lower, upper=upper, coverage=coverage)
    if failed:
        fit.warnings.append(f"{failed} bootstrap replicates failed and were skipped")
    return fit
