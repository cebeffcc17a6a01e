"""Build script: compiles the optional extension core.

The package is fully functional without the extension (the numpy
reference kernels in ``torusmfg._core.reference`` are selected at import
when ``_speedups`` is missing); the extension only accelerates the hot
kernels. ``optional=True`` keeps installation alive on toolchain-less
hosts.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # source install without build extras
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "torusmfg._core._speedups",
                ["src/torusmfg/_core/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
