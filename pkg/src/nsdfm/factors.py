"""Principal-component estimation of loadings and I(1) factors."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import eigsh

from .errors import EstimationError
from .panel import as_matrix

SIGN_CONVENTION = "largest-abs-entry-positive"
_DENSE_LIMIT = 2000


@dataclass(frozen=True)
class FactorModel:
    """Estimated loadings and factors.

    Attributes
    ----------
    loadings : ndarray, shape (n, r)
        Normalized so that ``loadings.T @ loadings / n`` is the identity.
    factors : ndarray, shape (r, T + 1)
        Factor levels ``loadings.T @ x_t / n``.
    diff_factors : ndarray, shape (r, T)
    eigvals : ndarray, shape (r,)
        Leading eigenvalues of the uncentered covariance of differences.
    """

    loadings: np.ndarray
    factors: np.ndarray
    diff_factors: np.ndarray
    eigvals: np.ndarray

    @property
    def r(self) -> int:
        return self.loadings.shape[1]

    @property
    def common_component(self) -> np.ndarray:
        return self.loadings @ self.factors

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "eigvals": self.eigvals.tolist(),
            "sign_convention": SIGN_CONVENTION,
            "loadings": {"shape": list(self.loadings.shape), "data": self.loadings.ravel().tolist()},
            "factors": {"shape": list(self.factors.shape), "data": self.factors.ravel().tolist()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FactorModel":
        lam = np.asarray(d["loadings"]["data"], dtype=float).reshape(d["loadings"]["shape"])
        f = np.asarray(d["factors"]["data"], dtype=float).reshape(d["factors"]["shape"])
        return cls(lam, f, np.diff(f, axis=1), np.asarray(d["eigvals"], dtype=float))


def covariance_uncentered(diffs) -> np.ndarray:
    """``diffs @ diffs.T / T`` for an ``n x T`` matrix, without demeaning."""
    d = as_matrix(diffs)
    T = d.shape[1]
    g = d @ d.T / T
    return (g + g.T) / 2.0


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    ``argmax`` returns the first index on ties, so the lowest index wins.
    """
    v = np.array(vectors, dtype=np.float64, copy=True)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def top_eigen(sym, k: int):
    """Largest ``k`` eigenpairs of a symmetric matrix, in descending order."""
    a = np.asarray(sym, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    if n <= _DENSE_LIMIT or k >= n - 1:
        vals, vecs = linalg.eigh(a, subset_by_index=[n - k, n - 1])
    else:
        vals, vecs = eigsh(a, k=k, which="LA")
    order = np.argsort(vals)[::-1]
    return vals[order], fix_signs(vecs[:, order])


def estimate_factors(x, r: int) -> FactorModel:
    """Loadings ``sqrt(n) W`` from the top-``r`` eigenvectors of the
    uncentered covariance of first differences, factors ``Lambda' x_t / n``.
    """
    xm = as_matrix(x)
    n, T1 = xm.shape
    if r < 1 or r > min(n, T1 - 1):
        raise ValueError(f"r={r} must lie in 1..min(n, T)")
    dx = np.diff(xm, axis=1)
    gamma0 = covariance_uncentered(dx)
    vals, vecs = top_eigen(gamma0, r)
    if vals[-1] <= 1e-12 * max(vals[0], 1e-300):
        raise EstimationError(
            f"r={r} exceeds the numerical rank of the covariance of differences "
            f"(eigenvalue {r} is {vals[-1]:.3g})"
        )
    lam = np.sqrt(n) * vecs
    factors = lam.T @ xm / n
    return FactorModel(lam, factors, np.diff(factors, axis=1), vals)


def eigenvalues_of_differences(x) -> np.ndarray:
    """All eigenvalues of the uncentered covariance of differences, descending."""
    dx = np.diff(as_matrix(x), axis=1)
    return np.linalg.eigvalsh(covariance_uncentered(dx))[::-1]
