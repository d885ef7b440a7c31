import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("IMUMATCH_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("imumatch._ckernels", ["src/imumatch/_ckernels.pyx"],
                   include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
