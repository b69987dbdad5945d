"""Build script: compiles the optional kernel extension when Cython and a C
compiler are present; otherwise the package installs with the pure-Python
kernels only.

    python setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/parcd/_kernels/_core.pyx"],
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
except ImportError:
    pass

setup(ext_modules=ext_modules)
