import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are an optional speed path; the package falls back to
# the NumPy kernels when the extension is absent.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "sdrcnn.tensor._kernels",
                sources=["src/sdrcnn/tensor/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
