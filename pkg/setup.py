from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled kernels in bit-exact lockstep with the
# numpy fallback (FMA contraction would change rounding of a*b+c chains).
extensions = [
    Extension(
        "palsy._core._ckernels",
        sources=["src/palsy/_core/_ckernels.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
