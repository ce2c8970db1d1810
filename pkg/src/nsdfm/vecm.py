"""Reduced-rank (Johansen) estimation of a singular VECM on estimated factors.

The model is::

    dF_t = alpha beta' F_{t-1} + G_1 dF_{t-1} + ... + G_p dF_{t-p} + h + w_t,
    w_t = K u_t,

with ``c`` cointegration relations and ``q`` shocks. ``p`` counts lagged
differences, so the implied levels VAR has order ``p + 1``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import EstimationError
from .factors import fix_signs
from .linalg import from_shaped, ols, sym_inv_sqrt, to_shaped

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VecmModel:
    beta: np.ndarray  # (r, c), beta' S11 beta = I
    alpha: np.ndarray  # (r, c)
    gamma: list  # p matrices (r, r)
    intercept: np.ndarray | None
    residuals: np.ndarray  # (r, T - p)
    K: np.ndarray  # (r, q)
    eigvals: np.ndarray  # (c,)
    S11: np.ndarray

    @property
    def r(self) -> int:
        return self.beta.shape[0]

    @property
    def c(self) -> int:
        return self.beta.shape[1]

    @property
    def q(self) -> int:
        return self.K.shape[1]

    @property
    def p(self) -> int:
        return len(self.gamma)

    @property
    def pi(self) -> np.ndarray:
        return self.alpha @ self.beta.T

    def beta_triangular(self) -> np.ndarray:
        """``beta`` rescaled so its first ``c x c`` block is the identity (display only)."""
        return self.beta @ np.linalg.inv(self.beta[: self.c, : self.c])

    def var_coefs(self) -> list:
        return vecm_to_var(self)

    def to_dict(self) -> dict:
        return {
            "kind": "vecm",
            "p": self.p,
            "c": self.c,
            "q": self.q,
            "beta": to_shaped(self.beta),
            "alpha": to_shaped(self.alpha),
            "gamma": [to_shaped(g) for g in self.gamma],
            "intercept": None if self.intercept is None else self.intercept.tolist(),
            "K": to_shaped(self.K),
            "eigvals": self.eigvals.tolist(),
            "S11": to_shaped(self.S11),
            "residuals": to_shaped(self.residuals),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "VecmModel":
        return cls(
            beta=from_shaped(d["beta"]),
            alpha=from_shaped(d["alpha"]),
            gamma=[from_shaped(g) for g in d["gamma"]],
            intercept=None if d["intercept"] is None else np.asarray(d["intercept"], dtype=float),
            residuals=from_shaped(d["residuals"]),
            K=from_shaped(d["K"]),
            eigvals=np.asarray(d["eigvals"], dtype=float),
            S11=from_shaped(d["S11"]),
        )


def _lagged_design(F: np.ndarray, n_lagdiff: int, intercept: bool):
    """Rows ``t = n_lagdiff + 1 .. T``: ``(dF_t, F_{t-1}, [dF_{t-1}..dF_{t-L}, 1])``."""
    r, T1 = F.shape
    T = T1 - 1
    dF = np.diff(F, axis=1)  # column t-1 holds dF_t
    start = n_lagdiff + 1
    if start > T:
        raise EstimationError(f"{n_lagdiff} lagged differences leave no observations (T={T})")
    ts = np.arange(start, T + 1)
    y = dF[:, ts - 1].T
    lev = F[:, ts - 1].T
    cols = [dF[:, ts - 1 - j].T for j in range(1, n_lagdiff + 1)]
    if intercept:
        cols.append(np.ones((len(ts), 1)))
    z = np.hstack(cols) if cols else np.zeros((len(ts), 0))
    return y, lev, z


def concentrate(F, p: int = 1, intercept: bool = False):
    """Residuals of ``dF_t`` and ``F_{t-1}`` on ``dF_{t-1}..dF_{t-p+1}`` (and a constant).

    ``p`` is the order of the levels VAR; ``p = 1`` with no intercept passes
    ``(dF_t, F_{t-1})`` through untouched. Returns ``(e0, e1)``, each of shape
    ``(N, r)`` with one row per usable period.
    """
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if p < 1:
        raise ValueError("p must be at least 1")
    y, lev, z = _lagged_design(F, p - 1, intercept)
    if z.shape[1] == 0:
        return y, lev
    if np.linalg.matrix_rank(z) < z.shape[1]:
        raise EstimationError("collinear regressors when concentrating out short-run dynamics")
    _, e0, _ = ols(y, z)
    _, e1, _ = ols(lev, z)
    return e0, e1


def estimate_K(residuals, q: int, loadings=None) -> np.ndarray:
    """Top-``q`` eigenvectors of the residual covariance scaled by root eigenvalues.

    ``K @ K.T`` is the best rank-``q`` approximation of the covariance. With
    ``loadings`` the approximation is taken in the metric ``L'L / n`` (the
    identity for principal-component loadings), which makes ``L @ K``
    invariant to invertible re-rotations of the factors; column signs then
    follow the largest entry of ``L @ K`` instead of ``K``.
    """
    w = np.atleast_2d(np.asarray(residuals, dtype=np.float64))
    r, N = w.shape
    if not 1 <= q <= r:
        raise ValueError(f"q={q} must lie in 1..{r}")
    cov = w @ w.T / N
    if loadings is not None:
        lam = np.atleast_2d(np.asarray(loadings, dtype=np.float64))
        if lam.shape[1] != r:
            raise ValueError(f"loadings have {lam.shape[1]} columns, residuals {r} rows")
        root = linalg.sqrtm(lam.T @ lam / lam.shape[0]).real
        cov = root @ cov @ root
    cov = (cov + cov.T) / 2.0
    vals, vecs = linalg.eigh(cov)
    vals, vecs = vals[::-1][:q], vecs[:, ::-1][:, :q]
    tol = 1e-12 * max(vals[0], 1e-300)
    if vals[-1] <= tol:
        warnings.warn(f"q={q} exceeds the numerical rank of the residual covariance; flooring at 0", RuntimeWarning)
        vals = np.clip(vals, 0.0, None)
    if loadings is None:
        return fix_signs(vecs) * np.sqrt(vals)
    K = linalg.solve(root, vecs, assume_a="pos") * np.sqrt(vals)
    impact = lam @ K
    signs = np.sign(impact[np.argmax(np.abs(impact), axis=0), np.arange(q)])
    signs[signs == 0] = 1.0
    return K * signs


def johansen(F, p: int = 1, c: int = 1, intercept: bool = True, q: int | None = None) -> VecmModel:
    """Two-step reduced-rank estimation.

    Step one solves the canonical-correlation eigenproblem
    ``det(mu S11 - S10 S00^{-1} S01) = 0`` through symmetric whitening of
    ``S11``; step two recovers ``alpha``, the ``G_k`` and the constant by
    least squares given ``beta``. ``q`` defaults to ``r``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    r, T1 = F.shape
    if not 1 <= c < r:
        raise ValueError(f"cointegration rank c={c} must satisfy 1 <= c < r={r}")
    if p < 0:
        raise ValueError("p must be non-negative")
    y, lev, z = _lagged_design(F, p, intercept)
    N = y.shape[0]
    if N < r * (p + 1) + c + 5:
        raise EstimationError(f"too few observations ({N}) for r={r}, p={p}, c={c}")
    if z.shape[1]:
        if np.linalg.matrix_rank(z) < z.shape[1]:
            raise EstimationError("collinear regressors when concentrating out short-run dynamics")
        _, e0, _ = ols(y, z)
        _, e1, _ = ols(lev, z)
    else:
        e0, e1 = y, lev
    S00 = e0.T @ e0 / N
    S11 = e1.T @ e1 / N
    S01 = e0.T @ e1 / N
    s11_isqrt = sym_inv_sqrt(S11, what="S11 (product moment of lagged factor levels)")
    try:
        s00_inv_s01 = linalg.solve(S00, S01, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise EstimationError(f"S00 is singular: {exc}") from None
    m = s11_isqrt @ S01.T @ s00_inv_s01 @ s11_isqrt
    mu, U = linalg.eigh((m + m.T) / 2.0)
    mu, U = mu[::-1], U[:, ::-1]
    if mu[0] > 1 + 1e-8 or mu[-1] < -1e-8:
        warnings.warn(f"generalized eigenvalues outside [0, 1]: {mu[[0, -1]]}", RuntimeWarning)
    mu = np.clip(mu, 0.0, 1.0)
    beta = s11_isqrt @ fix_signs(U[:, :c])

    # second step: OLS of dF_t on (beta' F_{t-1}, lagged dF, constant)
    x2 = np.hstack([lev @ beta, z])
    coef, resid, _ = ols(y, x2)
    alpha = coef[:c].T
    gamma = [coef[c + j * r: c + (j + 1) * r].T for j in range(p)]
    h = coef[-1] if intercept else None
    qq = r if q is None else q
    K = estimate_K(resid.T, qq)
    return VecmModel(beta, alpha, gamma, h, resid.T, K, mu[:c], S11)


def vecm_to_var(m: VecmModel) -> list:
    """Levels VAR(p + 1) coefficients.

    ``A_1 = G_1 + alpha beta' + I``, ``A_k = G_k - G_{k-1}``, ``A_{p+1} = -G_p``.
    """
    r = m.r
    pi = m.pi
    g = m.gamma
    if not g:
        return [np.eye(r) + pi]
    out = [g[0] + pi + np.eye(r)]
    for k in range(1, len(g)):
        out.append(g[k] - g[k - 1])
    out.append(-g[-1])
    return out


def unit_root_count(coefs, tol: float = 1e-6) -> int:
    """Singular values of ``I - sum A_k`` below ``tol``."""
    r = coefs[0].shape[0]
    a1 = np.eye(r) - np.sum(coefs, axis=0)
    return int(np.sum(np.linalg.svd(a1, compute_uv=False) < tol))
