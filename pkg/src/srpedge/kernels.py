"""Backend selection for the SRP inner loops.

The compiled extension is used when it imports; set ``SRPEDGE_PURE_PYTHON=1`` to force
the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SRPEDGE_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "numpy"

edge_accumulate = _impl.edge_accumulate
lc_accumulate = _impl.lc_accumulate
td_gather = _impl.td_gather


def available_backends() -> dict:
    """Every importable kernel implementation, keyed by name."""
    backends = {"numpy": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
