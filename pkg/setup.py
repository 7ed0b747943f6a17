"""Build script for the optional compiled integrator core.

The package works without the extension (a pure-NumPy fallback is selected
at import time), so a failed compile is downgraded to a warning.
"""

import warnings

import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "roagp._simcore",
                ["src/roagp/_simcore.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    warnings.warn("Cython unavailable; building without the compiled integrator core")
    extensions = []

setup(ext_modules=extensions)
