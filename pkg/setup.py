import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pathmatch.nd._ckernels",
                ["src/pathmatch/nd/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Pure-python kernels are selected at import when the extension is absent.
    ext_modules = []

setup(ext_modules=ext_modules)
