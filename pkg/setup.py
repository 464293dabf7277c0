"""Build script for the optional compiled iteration kernels.

The package is pure Python plus one Cython extension holding the hot
per-iteration solver loops.  The extension is marked optional: if it cannot
be built (no compiler, no Cython) the install still succeeds and the package
falls back to the numpy implementation of the same kernels at import time.
"""

from setuptools import Extension, setup

ext = Extension(
    "jedmimo._kernels._iter_cy",
    sources=["src/jedmimo/_kernels/_iter_cy.pyx"],
    extra_compile_args=["-O3"],
)
ext.optional = True

try:
    from Cython.Build import cythonize

    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
