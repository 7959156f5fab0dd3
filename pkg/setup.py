"""Build hook for the optional compiled kernels.

The pure-Python fallbacks are selected at import time when the extensions
are missing, so a failed compile only costs speed.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext

EXTENSIONS = [
    ("elastiq.nn._lstm_ext", "src/elastiq/nn/_lstm_ext.pyx"),
    ("elastiq.market._thermal_ext", "src/elastiq/market/_thermal_ext.pyx"),
]


# Not -ffast-math: keep IEEE summation order so results stay reproducible.
COMPILE_ARGS = ["-O3", "-march=native", "-fno-math-errno", "-ffinite-math-only", "-fno-signed-zeros"]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc})", file=sys.stderr)


def ext_modules():
    if os.environ.get("ELASTIQ_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    exts = [
        Extension(name, [src], include_dirs=[np.get_include()], extra_compile_args=COMPILE_ARGS)
        for name, src in EXTENSIONS
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=ext_modules(), cmdclass={"build_ext": OptionalBuildExt})
