"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (a pure-numpy backend is selected at
import time), so the extension is marked optional and any build failure is
non-fatal.
"""

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "cbrbench._kernels._fast",
        ["src/cbrbench/_kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext.optional = True
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
