"""Build script for the optional compiled kernels.

The package works without the extension (a pure NumPy/SciPy fallback is
selected at import time), but the compiled kernels make the Monte Carlo
studies dramatically faster on a single core.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "vhsvar.kernels._core",
        ["src/vhsvar/kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
