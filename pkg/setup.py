# Builds the optional compiled enumeration kernel.  When Cython is not
# available the package still installs and falls back to the pure-Python
# kernel at import time.
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ghostkeys/_kernels/_subseq.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
