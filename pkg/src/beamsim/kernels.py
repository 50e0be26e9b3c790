"""Selects the compiled geometry kernels, falling back to pure numpy.

Set BEAMSIM_PURE_PYTHON=1 to force the numpy implementation (used by the
benchmark and the cross-implementation tests).
"""

import os

from . import _kernels_py

if os.environ.get("BEAMSIM_PURE_PYTHON"):
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        HAVE_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        HAVE_COMPILED = False

VIRTUAL_SOURCE_RANGE = _kernels_py.VIRTUAL_SOURCE_RANGE

blockage_loss_los = _impl.blockage_loss_los
blockage_loss_nlos = _impl.blockage_loss_nlos
gt_intersect = _impl.gt_intersect
