"""Backend selection for the filter-bank inner loops.

The compiled Cython module is preferred. Setting the environment variable
``DPFBMC_PURE_PYTHON=1`` before import forces the numpy implementation.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DPFBMC_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

overlap_add = _impl.overlap_add
polyphase_fold = _impl.polyphase_fold
direct_synthesis = _impl.direct_synthesis


def backends():
    """Return the available ``{name: module}`` kernel implementations."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled
    except ImportError:
        return found
    found["cython"] = _compiled
    return found
