import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "rovermotion._track_cy",
                ["src/rovermotion/_track_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # pure-Python fallback is selected at import time
    extensions = []

setup(ext_modules=extensions)
