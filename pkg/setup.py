"""Build the optional compiled kernel core.

The package works without the extension (a numpy fallback is selected at
import time); the extension only accelerates the conv pack/unpack loops.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tcwae.kernels._convcore",
                sources=["src/tcwae/kernels/_convcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
