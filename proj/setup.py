import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "_hmica",
    sorted(glob.glob("src/*.cpp")) + ["bindings/pymodule.cpp"],
    include_dirs=["include", "vendor", "/usr/include/eigen3"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
