"""Build script for the optional compiled kernel core.

The package works without the extension (numpy fallback kernels are selected
at import time), so any failure here degrades to a pure-Python install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dams.engine._ckernels",
                ["src/dams/engine/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"warning: compiled kernels disabled ({exc}); "
                     "falling back to numpy kernels\n")

setup(ext_modules=ext_modules)
