"""Unrestricted least-squares VAR in levels for the factors."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError
from .linalg import from_shaped, ols, to_shaped
from .vecm import estimate_K


@dataclass(frozen=True)
class VarModel:
    A: list  # p matrices (r, r)
    intercept: np.ndarray | None
    residuals: np.ndarray  # (r, T + 1 - p)
    K: np.ndarray
    rank: int

    @property
    def p(self) -> int:
        return len(self.A)

    @property
    def q(self) -> int:
        return self.K.shape[1]

    @property
    def r(self) -> int:
        return self.K.shape[0]

    def var_coefs(self) -> list:
        return list(self.A)

    def to_dict(self) -> dict:
        return {
            "kind": "var",
            "p": self.p,
            "q": self.q,
            "A": [to_shaped(a) for a in self.A],
            "intercept": None if self.intercept is None else self.intercept.tolist(),
            "K": to_shaped(self.K),
            "residuals": to_shaped(self.residuals),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "VarModel":
        A = [from_shaped(a) for a in d["A"]]
        return cls(
            A=A,
            intercept=None if d["intercept"] is None else np.asarray(d["intercept"], dtype=float),
            residuals=from_shaped(d["residuals"]),
            K=from_shaped(d["K"]),
            rank=len(A) * A[0].shape[0] + (d["intercept"] is not None),
        )


def var_design(F: np.ndarray, p: int, intercept: bool):
    """Rows ``t = p..T``: targets ``F_t`` and regressors ``(F_{t-1}..F_{t-p}, 1)``."""
    r, T1 = F.shape
    ts = np.arange(p, T1)
    y = F[:, ts].T
    cols = [F[:, ts - j].T for j in range(1, p + 1)]
    if intercept:
        cols.append(np.ones((len(ts), 1)))
    return y, np.hstack(cols)


def var_ls(F, p: int = 2, intercept: bool = True, q: int | None = None) -> VarModel:
    """Equation-by-equation OLS of ``F_t`` on ``p`` lags (and a constant).

    A rank-deficient design falls back to the minimum-norm slopes, computed
    on centred data; constant factors therefore give zero slopes and an
    intercept equal to the constant.
    """
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    r, T1 = F.shape
    if p < 1:
        raise ValueError("p must be at least 1")
    if T1 - 1 <= r * p + 1:
        raise EstimationError(f"T={T1 - 1} too small for a VAR({p}) in {r} variables")
    y, x = var_design(F, p, False)
    if intercept:
        # slopes from centred data so a degenerate design puts everything in the constant
        ybar, xbar = y.mean(axis=0), x.mean(axis=0)
        coef, _, rank = ols(y - ybar, x - xbar)
        h = ybar - xbar @ coef
        rank += 1
    else:
        coef, _, rank = ols(y, x)
        h = None
    if not np.all(np.isfinite(coef)):
        raise EstimationError("singular regressor Gram matrix")
    resid = y - x @ coef - (0.0 if h is None else h)
    A = [coef[j * r:(j + 1) * r].T for j in range(p)]
    K = estimate_K(resid.T, r if q is None else q)
    return VarModel(A, h, resid.T, K, rank)
