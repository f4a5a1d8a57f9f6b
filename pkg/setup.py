"""Build script: compiles the recurrence kernels when Cython + a C compiler
are available, otherwise installs pure-Python only (the package falls back to
the numpy kernels at import time)."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ball3d/nn/kernels/_recurrence_cy.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
