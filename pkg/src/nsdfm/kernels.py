"""Dispatch between the compiled recursions and the NumPy fallback.

The compiled module is used when importable. Setting the environment variable
``NSDFM_PURE_PYTHON=1`` forces the fallback, which the test-suite uses to
check that both paths agree.
"""
import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("NSDFM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

var_simulate = _impl.var_simulate
poly_inverse = _impl.poly_inverse
idio_filter = _impl.idio_filter
cross_section_ar = _impl.cross_section_ar

__all__ = [
    "BACKEND",
    "var_simulate",
    "poly_inverse",
    "idio_filter",
    "cross_section_ar",
]
