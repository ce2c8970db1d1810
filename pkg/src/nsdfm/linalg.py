"""Small dense linear-algebra helpers shared by the estimators."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import EstimationError


def ols(y: np.ndarray, x: np.ndarray, rcond: float = 1e-10):
    """Least squares of ``y`` (N x m) on ``x`` (N x k) via SVD.

    Rank-deficient designs get the minimum-norm (pseudo-inverse) solution.
    Returns ``(coef, resid, rank)`` with ``coef`` of shape (k, m).
    """
    if x.shape[1] == 0:
        return np.zeros((0, y.shape[1])), y.copy(), 0
    coef, _, rank, _ = linalg.lstsq(x, y, cond=rcond, lapack_driver="gelsd")
    return coef, y - x @ coef, int(rank)


def sym_inv_sqrt(a: np.ndarray, max_cond: float = 1e12, what: str = "matrix") -> np.ndarray:
    """``a^{-1/2}`` for a symmetric positive definite ``a``."""
    vals, vecs = linalg.eigh((a + a.T) / 2.0)
    top = vals[-1]
    if vals[0] <= 0 or top / vals[0] > max_cond:
        raise EstimationError(
            f"{what} is ill-conditioned: smallest eigenvalue {vals[0]:.3g}, largest {top:.3g}"
        )
    return (vecs / np.sqrt(vals)) @ vecs.T


def to_shaped(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def from_shaped(d) -> np.ndarray:
    return np.asarray(d["data"], dtype=float).reshape(d["shape"])
