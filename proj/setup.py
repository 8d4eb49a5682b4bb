"""Builds the _monfap extension by delegating to the CMake project."""

import shutil
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
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        configure = [
            "cmake",
            str(source_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DSKBUILD=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(configure, cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_monfap", "-j"],
            check=True,
        )

        built = sorted(build_dir.glob("_monfap*.so")) + sorted(
            build_dir.glob("**/_monfap*.so")
        )
        if not built:
            raise RuntimeError("cmake build produced no _monfap extension")
        out_path = Path(self.get_ext_fullpath(ext.name))
        out_path.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], out_path)


setup(
    ext_modules=[CMakeExtension("monfap._monfap")],
    cmdclass={"build_ext": CMakeBuild},
)
