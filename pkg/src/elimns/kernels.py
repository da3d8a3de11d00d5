"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is used. Setting ``ELIMNS_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ELIMNS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

scan_elimination = _impl.scan_elimination
full_interval_scan = _impl.full_interval_scan

__all__ = ["BACKEND", "scan_elimination", "full_interval_scan"]
