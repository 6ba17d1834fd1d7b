"""Search kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imports; set ``SEGREG_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("SEGREG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

segment_costs = _active.segment_costs
partition_dp = _active.partition_dp
continuous_dp = _active.continuous_dp
lower_envelope = _active.lower_envelope

__all__ = ["BACKEND", "compiled_backend", "python_backend", "segment_costs",
           "partition_dp", "continuous_dp", "lower_envelope"]
