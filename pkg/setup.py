import os

from setuptools import setup
from setuptools.command.build_ext import build_ext

ext_modules = []
if os.environ.get("PVALMIX_PURE") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            "src/pvalmix/_kernels.pyx",
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.optional = True


class optional_build_ext(build_ext):
    # a failed compile leaves the pure-Python kernels in charge
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: compiled kernels not built ({exc}); using pure-Python fallback")


setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
