"""Kernel backend selection.

The compiled extension is used when it imports; setting MRVFLAB_PURE_PYTHON=1
forces the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("MRVFLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

pava = _impl.pava
axis_order_bounds = _impl.axis_order_bounds
grid_edges = _impl.grid_edges
grid_isotonic = _impl.grid_isotonic
search_orders = _impl.search_orders
