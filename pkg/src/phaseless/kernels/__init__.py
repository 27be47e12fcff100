"""Hot kernels with a compiled core and a pure-Python fallback.

The Cython extension ``_core`` is used when it has been built, unless the
environment variable ``PHASELESS_PURE_PYTHON`` is set to a non-empty value
other than ``0``. ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback as fallback

try:
    from . import _core as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("PHASELESS_PURE_PYTHON", "0") in ("", "0"):
    active = compiled
    BACKEND = "cython"
else:
    active = fallback
    BACKEND = "python"

sign_scan = active.sign_scan
split_search = active.split_search
sign_branch = active.sign_branch

__all__ = ["BACKEND", "compiled", "fallback", "sign_branch", "sign_scan", "split_search"]
