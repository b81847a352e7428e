"""Build the evomd._core pybind11 extension with the project's CMake tree.

Metadata lives in pyproject.toml; this file only teaches setuptools how to
drive CMake for the extension module.
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str, sourcedir: str = "") -> None:
        super().__init__(name, sources=[])
        self.sourcedir = os.fspath(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)

        cfg = "Debug" if self.debug else "Release"
        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            f"-DPython3_EXECUTABLE={sys.executable}",
            "-DEVOMD_BUILD_PYTHON=ON",
            "-DEVOMD_BUILD_CLI=OFF",
            "-DEVOMD_BUILD_TESTS=OFF",
        ]
        subprocess.run(
            ["cmake", ext.sourcedir, *cmake_args], cwd=build_temp, check=True
        )
        jobs = str(os.cpu_count() or 2)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", "--parallel", jobs],
            cwd=build_temp,
            check=True,
        )

        # The CMake tree collects the module under python/evomd/; copy it to
        # wherever setuptools expects this extension to appear.
        built = list((build_temp / "python" / "evomd").glob("_core*"))
        if not built:
            raise RuntimeError(f"CMake did not produce _core under {build_temp}")
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], dest)


setup(
    ext_modules=[CMakeExtension("evomd._core")],
    cmdclass={"build_ext": CMakeBuild},
)
