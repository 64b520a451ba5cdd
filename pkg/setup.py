"""Build script: compiles the quadrature kernels when Cython is available.

The package works without the extension (mfclab.kernels falls back to the
pure-Python implementation), so a failed or skipped compile is not fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/mfclab/_kernels.pyx"],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
