"""Backend selection for the recursion kernels.

The compiled extension is preferred; the pure NumPy/SciPy fallback is
used when it is missing or when ``VHSVAR_PURE_PYTHON=1`` is set.  Both
backends expose identical functions with identical numerics (up to
floating-point associativity).
"""

import os

if os.environ.get("VHSVAR_PURE_PYTHON") == "1":
    from . import _ref as _backend

    BACKEND = "python"
else:
    try:
        from . import _core as _backend  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _backend

        BACKEND = "python"

garch_filter = _backend.garch_filter
garch_filter_derivs = _backend.garch_filter_derivs
cdcc_corr_filter = _backend.cdcc_corr_filter

__all__ = ["BACKEND", "garch_filter", "garch_filter_derivs", "cdcc_corr_filter"]
