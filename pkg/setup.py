# Build the optional compiled kernels in place during development:
#
#   python3 setup.py build_ext --inplace
#
# Set TOPOPOSE_NO_EXT=1 to skip the extension entirely; the package then runs
# on the pure-Python kernels in topopose/_pykernels.py.
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TOPOPOSE_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "topopose._kernels",
                    ["src/topopose/_kernels.pyx"],
                    language="c++",
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
