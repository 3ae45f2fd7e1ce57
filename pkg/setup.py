"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time), so the build is marked optional: a missing
compiler degrades performance, never the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    extensions = cythonize(
        [
            Extension(
                "wpnmine._kernels._ckern",
                ["src/wpnmine/_kernels/_ckern.pyx"],
                include_dirs=[np.get_include()],
                # fp-contract off: the compiled kernels must match the
                # pure-Python fallback bit for bit, so no FMA fusion
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
