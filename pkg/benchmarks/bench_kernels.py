"""Time the compiled recursions against the NumPy fallback.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each kernel is called with inputs of the sizes met in a Monte Carlo cell
(n = 200 series, T = 200 periods, r = 4 factors, 500 long-run horizons).
"""
import argparse
import timeit

import numpy as np

from nsdfm import _kernels_py

try:
    from nsdfm import _kernels
except ImportError:  # extension not built
    _kernels = None


def cases(rng):
    r, T, n, H = 4, 200, 200, 500
    a = 0.3 * rng.standard_normal((2, r, r))
    return {
        "var_simulate": (a, rng.standard_normal((T, r))),
        "poly_inverse": (a, H),
        "idio_filter": (rng.standard_normal((T, n)), rng.uniform(0, 0.5, n), (np.arange(n) < n // 2).astype(float)),
        "cross_section_ar": (rng.standard_normal((T, n)), 0.5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'python (ms)':>14}{'cython (ms)':>14}{'speed-up':>10}")
    for name, inputs in cases(rng).items():
        py = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:<18}{t_py:>14.3f}{'n/a':>14}{'':>10}")
            continue
        cy = getattr(_kernels, name)
        np.testing.assert_allclose(cy(*inputs), py(*inputs), rtol=1e-10, atol=1e-10)
        t_cy = min(timeit.repeat(lambda: cy(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_py:>14.3f}{t_cy:>14.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
