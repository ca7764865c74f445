"""Build the optional coordinate-descent extension.

The package works without the compiled kernel (a NumPy fallback is picked
up at import time), so a failed extension build is downgraded to a warning.
"""

import warnings

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "japmed._cd_cy",
                ["src/japmed/_cd_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    warnings.warn(f"building without compiled kernel: {exc}")
    extensions = []

setup(ext_modules=extensions)
