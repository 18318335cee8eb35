import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PATLAS_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "patlas._kernels",
                    ["src/patlas/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # no Cython: install the pure-Python fallback only
        ext_modules = []

setup(ext_modules=ext_modules)
