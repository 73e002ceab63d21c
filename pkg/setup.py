import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "styletune.kernels._convops",
                ["src/styletune/kernels/_convops.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: install with the pure-numpy kernel fallback only.
    ext_modules = []

setup(ext_modules=ext_modules)
