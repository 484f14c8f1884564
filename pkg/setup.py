"""Builds the optional Cython demapping kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "lhsim.kernels._demap_c",
                sources=["src/lhsim/kernels/_demap_c.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
