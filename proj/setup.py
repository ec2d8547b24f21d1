"""CMake-driven build of the _spazer extension module."""

import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        ext_dir = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).parent.resolve()

        cmake_args = [
            "-DCMAKE_BUILD_TYPE=Release",
            f"-DSPAZER_EXT_OUTPUT_DIR={ext_dir}",
            "-DSKBUILD=ON",
            "-DSPAZER_BUILD_TESTS=OFF",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(
            ["cmake", "-S", str(source_dir), "-B", str(build_dir), *cmake_args],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_spazer", "--parallel"],
            check=True,
        )


setup(
    packages=["spazer"],
    package_dir={"": "python"},
    ext_modules=[CMakeExtension("spazer._spazer")],
    cmdclass={"build_ext": CMakeBuild},
    zip_safe=False,
)
