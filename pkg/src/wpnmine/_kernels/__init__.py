"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python
module is the fallback and the reference. Both produce bit-identical
results. Set ``WPNMINE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import pykernels


def _select():
    if os.environ.get("WPNMINE_PURE_PYTHON", "") not in ("", "0"):
        return pykernels
    try:
        from . import _ckern

        return _ckern
    except ImportError:
        return pykernels


_impl = _select()

BACKEND_NAME: str = _impl.BACKEND_NAME
combined_distances = _impl.combined_distances
sgns_train = _impl.sgns_train
silhouette_samples = _impl.silhouette_samples

__all__ = [
    "BACKEND_NAME",
    "combined_distances",
    "sgns_train",
    "silhouette_samples",
    "pykernels",
]
