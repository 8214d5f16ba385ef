"""Build script for the optional compiled DP kernel.

The extension is marked optional: if no C toolchain (or Cython) is
available the install still succeeds and the package falls back to the
pure-numpy kernel at import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ehsched._kernels._dp_cython",
                ["src/ehsched/_kernels/_dp_cython.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
