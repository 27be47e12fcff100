import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("PHASELESS_NO_EXT"):
    try:
        import numpy
        import scipy  # noqa: F401  (cython_lapack is cimported by the kernel)
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "phaseless.kernels._core",
                    ["src/phaseless/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
