"""Demapping kernels: compiled Cython core with a numpy fallback.

The backend is picked once at import. Set LHSIM_PURE_PY=1 to force the
numpy implementation (used by the benchmark and for debugging).
"""
import os

if os.environ.get("LHSIM_PURE_PY") == "1":
    from lhsim.kernels._demap_py import demap_indices, demap_indices_multi
    BACKEND = "numpy"
else:
    try:
        from lhsim.kernels._demap_c import demap_indices, demap_indices_multi
        BACKEND = "cython"
    except ImportError:
        from lhsim.kernels._demap_py import demap_indices, demap_indices_multi
        BACKEND = "numpy"

__all__ = ["demap_indices", "demap_indices_multi", "BACKEND"]
