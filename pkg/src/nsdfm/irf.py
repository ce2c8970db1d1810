"""Raw and structurally identified impulse responses.

Responses of the (detrended) levels ``x_it`` to shock ``j`` at horizon ``k``
are ``lambda_i' B_k K r_j`` where ``B_k`` are the power-series coefficients
of the inverse VAR polynomial and ``r_j`` the identifying rotation.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from . import kernels
from .errors import IdentificationError

DEFAULT_LR_HORIZON = 500


def invert_polynomial(coefs, horizon: int) -> np.ndarray:
    """Coefficients ``B_0..B_H`` of ``(I - A_1 L - ... - A_s L^s)^{-1}``.

    ``B_0 = I`` and ``B_k = sum_{j <= min(k, s)} A_j B_{k-j}``. Unit roots
    are fine: the series is formal and the ``B_k`` need not decay.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    a = np.asarray(coefs, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    return kernels.poly_inverse(a, int(horizon))


@dataclass(frozen=True)
class IrfSet:
    """Impulse responses ``coeffs[i, j, k]`` plus what is needed to re-identify.

    ``B`` may extend past ``horizon`` so long-run responses are available;
    ``shock_matrix`` is ``K`` times every rotation and rescaling applied so
    far, so ``coeffs = loadings @ B[k] @ shock_matrix``.
    """

    loadings: np.ndarray
    B: np.ndarray
    shock_matrix: np.ndarray
    horizon: int
    identification: dict = field(default_factory=lambda: {"scheme": "raw"})
    normalization: tuple | None = None
    dynamics_tag: str = "vecm"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    coverage: float | None = None
    variable_names: list | None = None

    @property
    def coeffs(self) -> np.ndarray:
        return np.einsum("ia,kab,bj->ijk", self.loadings, self.B[: self.horizon + 1], self.shock_matrix)

    @property
    def n(self) -> int:
        return self.loadings.shape[0]

    @property
    def q(self) -> int:
        return self.shock_matrix.shape[1]

    def impact(self) -> np.ndarray:
        return self.loadings @ self.shock_matrix

    def rotate(self, R: np.ndarray, **changes) -> "IrfSet":
        return replace(self, shock_matrix=self.shock_matrix @ R, lower=None, upper=None, coverage=None, **changes)

    def to_dict(self) -> dict:
        c = self.coeffs
        out = {
            "n": self.n,
            "q": self.q,
            "horizon": self.horizon,
            "identification": self.identification,
            "normalization": list(self.normalization) if self.normalization else None,
            "dynamics": self.dynamics_tag,
            "variables": self.variable_names,
            "coeffs": {"shape": list(c.shape), "data": c.ravel().tolist()},
        }
        if self.lower is not None:
            out["coverage"] = self.coverage
            out["lower"] = {"shape": list(self.lower.shape), "data": self.lower.ravel().tolist()}
            out["upper"] = {"shape": list(self.upper.shape), "data": self.upper.ravel().tolist()}
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_csv(self, path) -> None:
        """Long format: ``variable, shock, horizon, value, lower, upper``."""
        c = self.coeffs
        names = self.variable_names or [str(i) for i in range(self.n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "shock", "horizon", "value", "lower", "upper"])
            for i in range(self.n):
                for j in range(self.q):
                    for k in range(self.horizon + 1):
                        lo = "" if self.lower is None else repr(float(self.lower[i, j, k]))
                        hi = "" if self.upper is None else repr(float(self.upper[i, j, k]))
                        w.writerow([names[i], j + 1, k, repr(float(c[i, j, k])), lo, hi])


def raw_irf(loadings, B, K, horizon: int | None = None, dynamics_tag: str = "vecm", variable_names=None) -> IrfSet:
    """``coeffs[i, j, k] = lambda_i' B_k k_j`` with no rotation."""
    lam = np.atleast_2d(np.asarray(loadings, dtype=np.float64))
    B = np.asarray(B, dtype=np.float64)
    K = np.atleast_2d(np.asarray(K, dtype=np.float64))
    if B.ndim != 3 or B.shape[1] != B.shape[2] or lam.shape[1] != B.shape[1] or K.shape[0] != B.shape[1]:
        raise ValueError(f"shape mismatch: loadings {lam.shape}, B {B.shape}, K {K.shape}")
    H = B.shape[0] - 1 if horizon is None else int(horizon)
    if H > B.shape[0] - 1:
        raise ValueError(f"horizon {H} exceeds the {B.shape[0] - 1} available coefficients")
    return IrfSet(lam, B, K, H, dynamics_tag=dynamics_tag, variable_names=variable_names)


def recursive_rotation(M: np.ndarray, max_cond: float = 1e10) -> np.ndarray:
    """Orthogonal ``R = M^{-1} chol(M M')`` making ``M R`` lower triangular."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > max_cond:
        raise IdentificationError(f"impact block of the ordered variables is ill-conditioned (cond={cond:.3g})")
    L = linalg.cholesky(M @ M.T, lower=True)
    R = linalg.solve(M, L)
    err = np.abs(R.T @ R - np.eye(R.shape[0])).max()
    if err > 1e-8:
        raise IdentificationError(f"recursive rotation is not orthogonal (error {err:.2g})")
    return R


def identify_recursive(irf: IrfSet, order) -> IrfSet:
    """Cholesky scheme on the impact responses of the ``q`` ordered variables.

    Shock ``j`` has no impact effect on ordered variables ``1..j-1``.
    """
    order = [int(i) for i in order]
    if len(order) != irf.q:
        raise IdentificationError(f"recursive scheme needs {irf.q} ordered variables, got {len(order)}")
    M = irf.impact()[order]
    R = recursive_rotation(M)
    return irf.rotate(R, identification={"scheme": "recursive", "order": order})


def long_run_response(irf: IrfSet, lr_horizon: int | None = None) -> np.ndarray:
    """Level responses at ``lr_horizon`` (a proxy for ``B_inf``); shape ``(n, q)``."""
    H = min(irf.B.shape[0] - 1, DEFAULT_LR_HORIZON) if lr_horizon is None else int(lr_horizon)
    if H > irf.B.shape[0] - 1:
        raise ValueError(f"long-run horizon {H} exceeds the {irf.B.shape[0] - 1} available coefficients")
    return irf.loadings @ irf.B[H] @ irf.shock_matrix


def identify_permanent(irf: IrfSet, tau: int = 1, lr_horizon: int | None = None, sign_variable: int = 0,
                       rank_tol: float = 1e-4) -> IrfSet:
    """Split shocks into ``tau`` permanent and ``q - tau`` transitory ones.

    The rotation comes from the SVD of the factor-space long-run matrix
    ``B_H K`` so that columns ``tau+1..q`` have no long-run effect. Permanent
    shocks are signed to raise ``sign_variable`` in the long run; transitory
    ones to raise it on impact.
    """
    q = irf.q
    if not 1 <= tau <= q:
        raise IdentificationError(f"tau={tau} must lie in 1..q={q}")
    H = min(irf.B.shape[0] - 1, DEFAULT_LR_HORIZON) if lr_horizon is None else int(lr_horizon)
    if H > irf.B.shape[0] - 1:
        raise ValueError(f"long-run horizon {H} exceeds the {irf.B.shape[0] - 1} available coefficients")
    from_var = irf.dynamics_tag == "var"
    if from_var:
        warnings.warn(
            "long-run identification on unrestricted levels-VAR dynamics: long-run responses "
            "are not consistently estimated without imposing the unit roots",
            RuntimeWarning,
            stacklevel=2,
        )
    xi = irf.B[H] @ irf.shock_matrix
    if not np.all(np.isfinite(xi)):
        raise IdentificationError("long-run matrix is not finite (explosive dynamics)")
    _, s, Vt = np.linalg.svd(xi)
    s = np.concatenate([s, np.zeros(q - len(s))])
    if s[0] <= 0:
        raise IdentificationError("long-run matrix is zero; no permanent shocks")
    ratio_next = s[tau] / s[0] if tau < q else 0.0
    if not from_var and (ratio_next > rank_tol or s[tau - 1] / s[0] <= rank_tol):
        raise IdentificationError(
            f"long-run matrix does not have rank tau={tau} (singular value ratios {s / s[0]}); "
            "re-estimate the number of common trends"
        )
    R = Vt.T.copy()
    lr = irf.loadings[sign_variable] @ xi @ R
    imp = irf.loadings[sign_variable] @ irf.shock_matrix @ R
    for j in range(q):
        ref = lr[j] if j < tau else imp[j]
        if ref < 0:
            R[:, j] = -R[:, j]
    return irf.rotate(R, identification={"scheme": "permanent", "tau": tau, "lr_horizon": H,
                                         "sign_variable": sign_variable})


def normalize_irf(irf: IrfSet, variable: int, shock: int, horizon: int, target: float) -> IrfSet:
    """Rescale shock ``shock`` so its response of ``variable`` at ``horizon`` is ``target``."""
    pivot = float(irf.loadings[variable] @ irf.B[horizon] @ irf.shock_matrix[:, shock])
    if abs(pivot) <= 1e-12:
        raise IdentificationError(f"cannot normalize: response of variable {variable} to shock {shock} is zero")
    scale = np.ones(irf.q)
    scale[shock] = target / pivot
    out = replace(irf, shock_matrix=irf.shock_matrix * scale, normalization=(variable, shock, horizon, target))
    if irf.lower is not None:
        out = replace(out, lower=irf.lower * scale[None, :, None], upper=irf.upper * scale[None, :, None])
    return out


def bootstrap_bands(x, settings, n_boot: int = 200, coverage: float = 0.68, seed: int = 0, **kw):
    """Residual bootstrap bands; see :func:`nsdfm.pipeline.bootstrap_bands`."""
    from .pipeline import bootstrap_bands as _bands

    return _bands(x, settings, n_boot=n_boot, coverage=coverage, seed=seed, **kw)
