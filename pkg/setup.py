"""Build script for the optional compiled step kernels.

The package works without the extension (a numpy fallback is selected at
import time); compiling it just makes the per-step update loops much faster
for long runs and sweeps.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Try to build the Cython kernels; fall back to pure Python on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: skipping compiled kernels ({exc}); "
                  "the numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "the numpy fallback will be used")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "accelsgd._kernels",
        ["src/accelsgd/_kernels.pyx"],
        # -ffp-contract=off: no FMA contraction, so the compiled kernels are
        # bit-identical to the numpy fallback (the backend parity tests rely
        # on this).
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
