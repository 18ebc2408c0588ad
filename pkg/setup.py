"""Build hook for the optional compiled kernels.

Set DISCLAB_NO_EXT=1 to skip compilation; the package then runs on the
numpy fallback.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DISCLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("disclab._ckernels", ["src/disclab/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
