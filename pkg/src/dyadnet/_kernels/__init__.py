"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when the
extension is unavailable or when DYADNET_PURE_PYTHON is set in the
environment. Both produce bit-identical results.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("DYADNET_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "extension"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

signed_scatter_add = _impl.signed_scatter_add
adam_update = _impl.adam_update

__all__ = ["BACKEND", "signed_scatter_add", "adam_update"]
