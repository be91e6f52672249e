"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``KCHASE_PURE_PYTHON=1``
forces the numpy fallback. ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("KCHASE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

relax_moves = _impl.relax_moves
wfa_run = _impl.wfa_run
opt_run = _impl.opt_run
serve_dp_run = _impl.serve_dp_run
hedge_run = _impl.hedge_run
ftl_run = _impl.ftl_run


def backends():
    """Every importable backend by name (for cross-checking and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
