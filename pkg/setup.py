import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "nsdfm._kernels",
                ["src/nsdfm/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:
    # no Cython: the NumPy fallback in nsdfm._kernels_py is used at import
    extensions = []

setup(ext_modules=extensions)
