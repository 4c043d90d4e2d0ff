"""Build script: compiles the tridiagonal/scan kernels when Cython and a C
compiler are available, otherwise installs the pure-Python package (the
scipy-backed fallback in pncem.backends._ref is selected at import time).
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "pncem.backends._core",
                sources=["src/pncem/backends/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
