"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementation in ``_pykernels`` is used. Set ``TSADEVAL_PURE_PYTHON=1``
to force the fallback (handy for benchmarking and for equivalence tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TSADEVAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _u8(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.uint8)


def merge_sorted(starts, ends):
    """Merge closed intervals already sorted by start; touching ends merge."""
    return _impl.merge_sorted(_i64(starts), _i64(ends))


def mask_runs(mask):
    """Return (first, last) inclusive index pairs of consecutive True runs."""
    return _impl.mask_runs(_u8(mask))


def zoh_resample_index(ts, labels, grid):
    """Source sample index for every grid point (ZOH plus missing-anomaly correction)."""
    return _impl.zoh_resample_index(_i64(ts), _u8(labels), _i64(grid))


def intersect(a_s, a_e, b_s, b_e):
    return _impl.intersect(_i64(a_s), _i64(a_e), _i64(b_s), _i64(b_e))


def intersection_measure(a_s, a_e, b_s, b_e) -> int:
    return int(_impl.intersection_measure(_i64(a_s), _i64(a_e), _i64(b_s), _i64(b_e)))


def use_backend(name: str) -> None:
    """Switch backend at runtime ("cython" or "python"); used by tests and benchmarks."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _pykernels, "python"
    elif name == "cython":
        from . import _ckernels

        _impl, BACKEND = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
