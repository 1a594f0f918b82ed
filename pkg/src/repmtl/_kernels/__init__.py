"""Kernel backend selection.

The compiled extension is preferred when present; the pure NumPy module is
the fallback. Set REPMTL_PURE=1 to force the fallback (used by the
benchmark and for debugging).
"""
import os

if os.environ.get("REPMTL_PURE"):
    from . import pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import pure as _impl

        BACKEND = "pure"

power_method_sym = _impl.power_method_sym
apg_l2_linear = _impl.apg_l2_linear

__all__ = ["BACKEND", "power_method_sym", "apg_l2_linear"]
