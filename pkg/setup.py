"""Builds the optional compiled path-search kernel.

The package is fully functional without the extension: kgcot.kg.paths falls
back to the pure-Python kernel when the compiled module is absent.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/kgcot/kg/_bfs.pyx",
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
