"""Builds the optional compiled training-loop extension.

The package works without it: rffol._core falls back to the pure numpy
loop when the extension is missing (see benchmarks/backend_bench.py for
the speed difference).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "rffol._core._loop_cy",
                ["src/rffol/_core/_loop_cy.pyx"],
                # -ffp-contract=off: no FMA contraction, keeps the compiled
                # loop numerically aligned with the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
