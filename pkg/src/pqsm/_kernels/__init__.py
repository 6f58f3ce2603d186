"""Neighborhood-statistics kernels: compiled core with a NumPy fallback.

The compiled module is built from ``_core.pyx`` at install time. When the
extension is missing (source checkout without a build) the fallback is used
transparently; set ``PQSM_PURE_PYTHON=1`` to force the fallback even when the
extension is available.
"""

import os

from . import _fallback

if os.environ.get("PQSM_PURE_PYTHON", "0") not in ("", "0"):
    local_stats = _fallback.local_stats
    KERNEL_BACKEND = "python"
else:
    try:
        from ._core import local_stats

        KERNEL_BACKEND = "compiled"
    except ImportError:
        local_stats = _fallback.local_stats
        KERNEL_BACKEND = "python"


def kernel_backend() -> str:
    """Which local_stats implementation is active: 'compiled' or 'python'."""
    return KERNEL_BACKEND
