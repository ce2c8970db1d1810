"""Pure NumPy versions of the sequential recursions.

These mirror ``_kernels.pyx`` one to one and are used when the compiled
extension is unavailable. All arrays are time-major: row ``t`` is one period.
"""
import numpy as np


def var_simulate(coefs, shocks):
    """Run ``F_t = sum_j A_j F_{t-j} + e_t`` from a zero history.

    Parameters
    ----------
    coefs : ndarray, shape (s, r, r)
    shocks : ndarray, shape (T, r)
        ``shocks[t - 1]`` enters period ``t``.

    Returns
    -------
    ndarray, shape (T + 1, r)
        Row 0 is the zero initial condition.
    """
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    shocks = np.ascontiguousarray(shocks, dtype=np.float64)
    s = coefs.shape[0]
    T, r = shocks.shape
    out = np.zeros((T + 1, r))
    for t in range(1, T + 1):
        acc = shocks[t - 1].copy()
        for j in range(1, min(s, t) + 1):
            acc += coefs[j - 1] @ out[t - j]
        out[t] = acc
    return out


def poly_inverse(coefs, horizon):
    """Power-series coefficients of ``(I - sum_j A_j L^j)^{-1}`` up to ``horizon``."""
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    s, r, _ = coefs.shape
    out = np.zeros((horizon + 1, r, r))
    out[0] = np.eye(r)
    for k in range(1, horizon + 1):
        acc = np.zeros((r, r))
        for j in range(1, min(k, s) + 1):
            acc += coefs[j - 1] @ out[k - j]
        out[k] = acc
    return out


def idio_filter(eps, d, rho):
    """Geometric MA followed by ``(1 - rho L)`` integration, zero history.

    ``z_t = d z_{t-1} + eps_t`` and ``xi_t = rho xi_{t-1} + z_t``. Returns
    shape ``(T + 1, n)`` with a zero first row.
    """
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    T, n = eps.shape
    out = np.zeros((T + 1, n))
    z = np.zeros(n)
    for t in range(1, T + 1):
        z = d * z + eps[t - 1]
        out[t] = rho * out[t - 1] + z
    return out


def cross_section_ar(eta, phi):
    """AR(1) across columns: ``e_i = phi e_{i-1} + sqrt(1 - phi^2) eta_i``.

    Gives unit variances and correlation ``phi^{|i-j|}`` between columns.
    """
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    out = np.empty_like(eta)
    if eta.shape[1] == 0:
        return out
    scale = np.sqrt(1.0 - phi * phi)
    out[:, 0] = eta[:, 0]
    for i in range(1, eta.shape[1]):
        out[:, i] = phi * out[:, i - 1] + scale * eta[:, i]
    return out
