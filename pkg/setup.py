"""Builds the optional compiled kernel core; without it terraseg uses numpy kernels."""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("terraseg.kernels._core", ["src/terraseg/kernels/_core.pyx"],
                   include_dirs=[np.get_include()], extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
