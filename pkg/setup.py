from setuptools import Extension, setup

# The compiled kernel is a speedup, not a requirement: the package falls back
# to the pure-Python kernel at import when the extension is unavailable.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "eventclone.numkernel._ckernel",
                ["src/eventclone/numkernel/_ckernel.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
