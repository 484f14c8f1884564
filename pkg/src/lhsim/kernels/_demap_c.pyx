# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop: minimum-distance demapping against a 16-point set."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def demap_indices(const double complex[::1] rx, const double complex[::1] points):
    """Index of the nearest constellation point for every received sample.

    Ties go to the lowest index (strict < comparison while scanning up).
    """
    cdef Py_ssize_t n = rx.shape[0]
    cdef Py_ssize_t m = points.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.empty(n, dtype=np.int32)
    cdef Py_ssize_t i, k, best
    cdef double d, dbest, dre, dim
    cdef double complex r
    for i in range(n):
        r = rx[i]
        best = 0
        dbest = 1e300
        for k in range(m):
            dre = r.real - points[k].real
            dim = r.imag - points[k].imag
            d = dre * dre + dim * dim
            if d < dbest:
                dbest = d
                best = k
        out[i] = best
    return out


def demap_indices_multi(const double complex[::1] rx,
                        const double complex[:, ::1] points,
                        const cnp.int64_t[::1] group):
    """Per-sample demap where sample i is matched against row group[i] of points."""
    cdef Py_ssize_t n = rx.shape[0]
    cdef Py_ssize_t m = points.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.empty(n, dtype=np.int32)
    cdef Py_ssize_t i, k, g, best
    cdef double d, dbest, dre, dim
    cdef double complex r
    for i in range(n):
        r = rx[i]
        g = group[i]
        best = 0
        dbest = 1e300
        for k in range(m):
            dre = r.real - points[g, k].real
            dim = r.imag - points[g, k].imag
            d = dre * dre + dim * dim
            if d < dbest:
                dbest = d
                best = k
        out[i] = best
    return out
