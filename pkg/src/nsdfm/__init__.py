"""Estimation of non-stationary dynamic factor models.

Large panels of I(1) series driven by a few common factors that are
cointegrated because fewer shocks than factors drive them. The package
extracts factors from levels, fits their dynamics as a VECM or a VAR in
levels, identifies impulse responses and selects the numbers of factors,
shocks and common trends.
"""
from .errors import ConfigError, DataError, EstimationError, IdentificationError, NsdfmError, SelectionError
from .factors import FactorModel, estimate_factors
from .irf import (
    IrfSet,
    identify_permanent,
    identify_recursive,
    invert_polynomial,
    long_run_response,
    normalize_irf,
    raw_irf,
)
from .kernels import BACKEND
from .panel import Panel, apply_transforms, detrend, difference, integrate, read_panel_csv
from .pipeline import EstimationSettings, FitResult, bootstrap_bands, estimate, estimate_with_bands
from .selection import SelectionResult, estimate_q, estimate_r, estimate_tau, select_all, select_counts, tune_penalty
from .spectral import SpectralDensity, lag_window_spectrum
from .var import VarModel, var_ls
from .vecm import VecmModel, johansen, vecm_to_var

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DataError",
    "EstimationError",
    "EstimationSettings",
    "FactorModel",
    "FitResult",
    "IdentificationError",
    "IrfSet",
    "NsdfmError",
    "Panel",
    "SelectionError",
    "SelectionResult",
    "SpectralDensity",
    "VarModel",
    "VecmModel",
    "apply_transforms",
    "bootstrap_bands",
    "detrend",
    "difference",
    "estimate",
    "estimate_factors",
    "estimate_q",
    "estimate_r",
    "estimate_tau",
    "estimate_with_bands",
    "identify_permanent",
    "identify_recursive",
    "integrate",
    "invert_polynomial",
    "johansen",
    "lag_window_spectrum",
    "long_run_response",
    "normalize_irf",
    "raw_irf",
    "read_panel_csv",
    "select_all",
    "select_counts",
    "tune_penalty",
    "var_ls",
    "vecm_to_var",
]
