# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recursions for simulation and polynomial inversion.

Signatures and semantics match ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def var_simulate(coefs, shocks):
    cdef double[:, :, ::1] A = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef double[:, ::1] e = np.ascontiguousarray(shocks, dtype=np.float64)
    cdef Py_ssize_t s = A.shape[0]
    cdef Py_ssize_t T = e.shape[0]
    cdef Py_ssize_t r = e.shape[1]
    out_arr = np.zeros((T + 1, r))
    cdef double[:, ::1] F = out_arr
    cdef Py_ssize_t t, j, a, b, jmax
    cdef double acc
    for t in range(1, T + 1):
        jmax = s if s < t else t
        for a in range(r):
            acc = e[t - 1, a]
            for j in range(1, jmax + 1):
                for b in range(r):
                    acc += A[j - 1, a, b] * F[t - j, b]
            F[t, a] = acc
    return out_arr


def poly_inverse(coefs, Py_ssize_t horizon):
    cdef double[:, :, ::1] A = np.ascontiguousarray(coefs, dtype=np.float64)
    cdef Py_ssize_t s = A.shape[0]
    cdef Py_ssize_t r = A.shape[1]
    out_arr = np.zeros((horizon + 1, r, r))
    cdef double[:, :, ::1] B = out_arr
    cdef Py_ssize_t k, j, a, b, c, jmax
    cdef double acc
    for a in range(r):
        B[0, a, a] = 1.0
    for k in range(1, horizon + 1):
        jmax = s if s < k else k
        for a in range(r):
            for b in range(r):
                acc = 0.0
                for j in range(1, jmax + 1):
                    for c in range(r):
                        acc += A[j - 1, a, c] * B[k - j, c, b]
                B[k, a, b] = acc
    return out_arr


def idio_filter(eps, d, rho):
    cdef double[:, ::1] e = np.ascontiguousarray(eps, dtype=np.float64)
    cdef double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] rr = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Py_ssize_t T = e.shape[0]
    cdef Py_ssize_t n = e.shape[1]
    out_arr = np.zeros((T + 1, n))
    cdef double[:, ::1] xi = out_arr
    z_arr = np.zeros(n)
    cdef double[::1] z = z_arr
    cdef Py_ssize_t t, i
    for t in range(1, T + 1):
        for i in range(n):
            z[i] = dd[i] * z[i] + e[t - 1, i]
            xi[t, i] = rr[i] * xi[t - 1, i] + z[i]
    return out_arr


def cross_section_ar(eta, double phi):
    cdef double[:, ::1] h = np.ascontiguousarray(eta, dtype=np.float64)
    cdef Py_ssize_t T = h.shape[0]
    cdef Py_ssize_t n = h.shape[1]
    out_arr = np.empty((T, n))
    cdef double[:, ::1] out = out_arr
    cdef double scale = sqrt(1.0 - phi * phi)
    cdef Py_ssize_t t, i
    if n == 0:
        return out_arr
    for t in range(T):
        out[t, 0] = h[t, 0]
        for i in range(1, n):
            out[t, i] = phi * out[t, i - 1] + scale * h[t, i]
    return out_arr
