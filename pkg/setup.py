"""Build hook for the optional compiled kernels.

The Cython extension is marked optional: if it cannot be built the package
still installs and ``lcaobound._backend`` falls back to the pure-Python
kernels at import time.  Set ``LCAOBOUND_NO_EXT=1`` to skip the build.
"""
import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("LCAOBOUND_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "lcaobound._kernels",
        ["src/lcaobound/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=_extensions())
