"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a vectorized numpy
fallback is selected at import time); building it makes the trajectory
optimizer roughly an order of magnitude faster per iteration.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "dualarm._kernels._native",
                sources=["src/dualarm/_kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
