"""Kernel backend selection.

The compiled extension ``srmc._kernels`` is used when it imports; otherwise the
numpy/pure-Python versions in ``srmc._fallback`` are used.  Setting
``SRMC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("SRMC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

rk4_char_grid = _impl.rk4_char_grid
rk4_geodesic_const = _impl.rk4_geodesic_const
tgraph_energy_grad = _impl.tgraph_energy_grad
intrinsic_area_grad = _impl.intrinsic_area_grad


def backends():
    """Available implementations by name, for tests and benchmarks."""
    out = {"python": _fallback}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
