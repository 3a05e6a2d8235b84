"""Build script: compiles the optional Cython sweep kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so the build is marked optional and a failed compile does not
abort installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "tunelab._backend._core",
        sources=["src/tunelab/_backend/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize(ext, language_level="3")
except ImportError:
    # No Cython/NumPy at build time: install pure-Python only.
    pass

setup(ext_modules=ext_modules)
