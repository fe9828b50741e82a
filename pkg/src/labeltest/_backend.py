"""Kernel backend selection.

The compiled extension is used when it imports; ``LABELTEST_PURE=1`` forces
the numpy fallback.
"""

from __future__ import annotations

import os

from labeltest import _pure

if os.environ.get("LABELTEST_PURE", "") not in ("", "0"):
    _kernels = _pure
    BACKEND = "python"
else:
    try:
        from labeltest import _ext as _kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _kernels = _pure
        BACKEND = "python"

kruskal_scan = _kernels.kruskal_scan
cut_counts = _kernels.cut_counts
NeighborCache = _kernels.NeighborCache

__all__ = ["BACKEND", "NeighborCache", "cut_counts", "kruskal_scan"]
