"""Kernel selection: compiled coordinate descent when available.

Set JAPMED_PURE_PYTHON=1 to force the NumPy fallback (used by the
benchmark and for debugging).
"""

import os

if os.environ.get("JAPMED_PURE_PYTHON") == "1":
    from japmed._cd_py import cd_gram

    KERNEL = "python"
else:
    try:
        from japmed._cd_cy import cd_gram  # type: ignore[no-redef]

        KERNEL = "compiled"
    except ImportError:
        from japmed._cd_py import cd_gram  # type: ignore[no-redef]

        KERNEL = "python"

__all__ = ["cd_gram", "KERNEL"]
