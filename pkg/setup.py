"""Builds the optional compiled kernel core.

The package works without it; ``sparseknn._backend`` falls back to the
pure-Python kernels when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SPARSEKNN_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "sparseknn._ckernels",
                    ["src/sparseknn/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
