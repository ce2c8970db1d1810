"""Lag-window estimation of the spectral density of first differences."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .panel import as_matrix

KERNELS = ("bartlett", "parzen")


def kernel_weights(kernel: str, bandwidth: int) -> np.ndarray:
    """Weights ``w(k / B)`` for ``k = 0..B``."""
    u = np.arange(bandwidth + 1) / bandwidth
    if kernel == "bartlett":
        w = 1.0 - u
    elif kernel == "parzen":
        w = np.where(u <= 0.5, 1 - 6 * u**2 + 6 * u**3, 2 * (1 - u) ** 3)
    else:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    if np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
        raise ValueError("kernel weights must lie in [0, 1]")
    return w


def default_bandwidth(T: int) -> int:
    return max(1, int(math.floor(0.75 * math.sqrt(T))))


def frequency_grid(bandwidth: int) -> np.ndarray:
    """``theta_h = pi h / (B + 1/2)`` for ``h = -B..B``."""
    h = np.arange(-bandwidth, bandwidth + 1)
    return np.pi * h / (bandwidth + 0.5)


def autocovariance(diffs, k: int) -> np.ndarray:
    """``(1/T) sum_{t=1}^{T-k} dx_t dx_{t+k}'``; negative ``k`` gives the transpose."""
    d = as_matrix(diffs)
    T = d.shape[1]
    if abs(k) >= T:
        raise ValueError(f"lag {k} must be smaller than T={T}")
    if k < 0:
        return autocovariance(d, -k).T
    return d[:, : T - k] @ d[:, k:].T / T


@dataclass
class SpectralDensity:
    """Hermitian spectral matrices on the symmetric grid ``h = -B..B``.

    ``matrices[h + B]`` is the estimate at ``grid[h + B]``; the middle slice
    is frequency zero.
    """

    bandwidth: int
    kernel: str
    grid: np.ndarray
    matrices: np.ndarray
    n_obs: int | None = None
    eigvals: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def zero_index(self) -> int:
        return self.bandwidth

    def at_zero(self) -> np.ndarray:
        return self.matrices[self.bandwidth]

    def write_eigvals_csv(self, path) -> None:
        """Rows are eigenvalue ranks ``j``, columns are grid frequencies."""
        ev = dynamic_eigenvalues(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", *(f"{th:.10g}" for th in self.grid)])
            for j in range(ev.shape[1]):
                w.writerow([j + 1, *(repr(float(v)) for v in ev[:, j])])


def lag_window_spectrum(diffs, bandwidth: int | None = None, kernel: str = "bartlett") -> SpectralDensity:
    """``(2 pi)^{-1} sum_{|k| <= B} Gamma_k e^{-i k theta} w(k / B)`` on the grid."""
    d = as_matrix(diffs)
    n, T = d.shape
    B = default_bandwidth(T) if bandwidth is None else int(bandwidth)
    if B < 1 or B >= T:
        raise ValueError(f"bandwidth {B} must satisfy 1 <= B < T={T}")
    w = kernel_weights(kernel, B)
    grid = frequency_grid(B)
    gammas = np.stack([autocovariance(d, k) for k in range(B + 1)])
    # Gamma_k e^{-ik th} + Gamma_k' e^{ik th} = cos(k th)(G + G') - i sin(k th)(G - G')
    sym = gammas + gammas.transpose(0, 2, 1)
    skew = gammas - gammas.transpose(0, 2, 1)
    sym[0] = gammas[0]
    skew[0] = 0.0
    ks = np.arange(B + 1)
    cosw = np.cos(np.outer(grid, ks)) * w
    sinw = np.sin(np.outer(grid, ks)) * w
    re = np.tensordot(cosw, sym, axes=(1, 0))
    im = -np.tensordot(sinw, skew, axes=(1, 0))
    mats = (re + 1j * im) / (2 * np.pi)
    mats = 0.5 * (mats + np.conj(mats.transpose(0, 2, 1)))
    # zero frequency in real arithmetic, exactly symmetric
    zero = np.tensordot(w, sym, axes=(0, 0)) / (2 * np.pi)
    mats[B] = 0.5 * (zero + zero.T)
    return SpectralDensity(B, kernel, grid, mats, n_obs=T)


def dynamic_eigenvalues(sd: SpectralDensity) -> np.ndarray:
    """Eigenvalues per frequency, shape ``(2B + 1, n)``, descending in each row."""
    if sd.eigvals is None:
        ev = np.linalg.eigvalsh(sd.matrices)[:, ::-1]
        sd.eigvals = np.ascontiguousarray(ev)
    return sd.eigvals


def zero_frequency_eigenvalues(sd: SpectralDensity) -> np.ndarray:
    return dynamic_eigenvalues(sd)[sd.zero_index]
