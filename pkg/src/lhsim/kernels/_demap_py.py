"""Pure-numpy fallback for the demapping kernel.

Chunked so the (n, 16) distance matrix never gets large enough to matter.
"""
import numpy as np

_CHUNK = 1 << 16


def demap_indices(rx, points):
    rx = np.ascontiguousarray(rx, dtype=np.complex128)
    points = np.asarray(points, dtype=np.complex128)
    out = np.empty(rx.shape[0], dtype=np.int32)
    for lo in range(0, rx.shape[0], _CHUNK):
        chunk = rx[lo:lo + _CHUNK]
        d2 = np.abs(chunk[:, None] - points[None, :]) ** 2
        out[lo:lo + _CHUNK] = d2.argmin(axis=1)
    return out


def demap_indices_multi(rx, points, group):
    rx = np.ascontiguousarray(rx, dtype=np.complex128)
    points = np.asarray(points, dtype=np.complex128)
    group = np.asarray(group, dtype=np.int64)
    out = np.empty(rx.shape[0], dtype=np.int32)
    for lo in range(0, rx.shape[0], _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        d2 = np.abs(rx[sl, None] - points[group[sl]]) ** 2
        out[sl] = d2.argmin(axis=1)
    return out
