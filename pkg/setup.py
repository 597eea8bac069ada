from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "insarchain._ckernels",
                ["src/insarchain/_ckernels.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # pure-Python fallback in insarchain._pykernels is selected at import
    ext_modules = []


setup(ext_modules=ext_modules)
