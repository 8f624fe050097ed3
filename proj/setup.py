import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

core_sources = sorted(glob.glob("src/*.cpp"))

ext = Pybind11Extension(
    "dudospect._core",
    sources=core_sources + ["bindings/dudospect_py.cpp"],
    include_dirs=["include", "vendor", "/usr/include/eigen3"],
    libraries=["z"],
    cxx_std=20,
    extra_compile_args=["-O3"],
)

setup(
    name="dudospect",
    version="0.1.0",
    description=(
        "Multi-pinhole cardiac SPECT simulation, MLEM reconstruction and "
        "dual-domain data-consistency operations"
    ),
    packages=["dudospect"],
    package_dir={"": "python"},
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
    python_requires=">=3.9",
    install_requires=["numpy"],
)
