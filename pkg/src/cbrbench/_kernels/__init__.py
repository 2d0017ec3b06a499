"""Hot numerical kernels with backend selection at import time.

The compiled Cython extension is preferred; the pure-numpy module is the
fallback. Set ``CBRBENCH_PURE=1`` to force the fallback (useful for the
backend benchmark and for debugging).
"""

from __future__ import annotations

import os

from . import pure as _pure

if os.environ.get("CBRBENCH_PURE"):
    _impl = _pure
    _BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        _BACKEND = "pure"

elu_forward = _impl.elu_forward
elu_backward = _impl.elu_backward
adam_update = _impl.adam_update
pairwise_sqdist = _impl.pairwise_sqdist
pairwise_sqdist_backward = _impl.pairwise_sqdist_backward
sinkhorn_plan = _impl.sinkhorn_plan
nearest_centroid = _impl.nearest_centroid
group_sums = _impl.group_sums


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'pure'."""
    return _BACKEND
