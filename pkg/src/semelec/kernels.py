"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``SEMELEC_KERNELS=python``
forces the numpy fallback (handy for debugging and benchmarking).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SEMELEC_KERNELS", "").lower() == "python":
    backend = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as backend  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        backend = _kernels_py
        BACKEND = "python"

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_MAX_STEPS = 2

fallback = _kernels_py
