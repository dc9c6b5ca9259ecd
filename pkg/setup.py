"""Build the optional Cython kernels.

The package works without them; ``rangeunfold._backend`` falls back to the
numpy implementation when the extension is missing.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("RANGEUNFOLD_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "rangeunfold._kernels",
                    ["src/rangeunfold/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:  # pragma: no cover
        print(f"rangeunfold: building without Cython kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
