"""Build script: compiles the optional C extension kernels.

The package works without the extension (a pure-numpy fallback is selected at
import time); any failure here downgrades to a pure-Python install.
"""

from setuptools import Extension, find_packages, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "dyadnet._kernels._core",
        sources=["src/dyadnet/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


try:
    ext_modules = _extensions()
except Exception:
    ext_modules = []

# Metadata lives in pyproject.toml; the fields repeated here are the minimum
# for installers too old to read it (their legacy develop/install paths
# otherwise miss the src layout and the entry point).
setup(
    name="dyadnet",
    version="0.1.0",
    package_dir={"": "src"},
    packages=find_packages("src"),
    python_requires=">=3.9",
    install_requires=["numpy>=1.22"],
    entry_points={"console_scripts": ["dyadnet = dyadnet.cli:main"]},
    ext_modules=ext_modules,
)
