"""Build script: compiles the optional quadrature extension when Cython and a
C compiler are available, otherwise installs the pure-Python package unchanged
(the package falls back to the numpy kernels at import time)."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "minktens._quad_fast",
                ["src/minktens/_quad_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
