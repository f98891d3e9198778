"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``.

Every function takes and returns contiguous ``int64`` arrays (``uint8`` for
masks and labels) and must agree bit-for-bit with its compiled twin.
"""

from __future__ import annotations

import numpy as np


def merge_sorted(starts: np.ndarray, ends: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(starts) == 0:
        return starts.copy(), ends.copy()
    # a new run begins where the start exceeds every end seen so far
    running_end = np.maximum.accumulate(ends)
    new = np.empty(len(starts), dtype=bool)
    new[0] = True
    new[1:] = starts[1:] > running_end[:-1]
    first = np.flatnonzero(new)
    last = np.append(first[1:] - 1, len(starts) - 1)
    return starts[first].copy(), running_end[last].copy()


def mask_runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(mask, dtype=np.int8)
    if len(m) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    d = np.diff(np.concatenate(([0], m, [0])))
    starts = np.flatnonzero(d == 1).astype(np.int64)
    ends = (np.flatnonzero(d == -1) - 1).astype(np.int64)
    return starts, ends


def zoh_index(ts: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Last original sample at or before each grid point; leading points back-fill to 0."""
    if len(ts) == 0:
        return np.zeros(len(grid), dtype=np.int64)
    idx = np.searchsorted(ts, grid, side="right").astype(np.int64) - 1
    np.maximum(idx, 0, out=idx)
    return idx


def correct_missing(ts: np.ndarray, labels: np.ndarray, grid: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Re-point unannotated grid samples at the last annotated original inside their window."""
    idx = idx.copy()
    ann = np.flatnonzero(labels)
    if not len(ann) or not len(grid):
        return idx
    # window k is (grid[k-1], grid[k]); originals exactly on a grid point are excluded
    k = np.searchsorted(grid, ts[ann], side="left")
    keep = (k >= 1) & (k < len(grid))
    keep[keep] &= grid[k[keep]] != ts[ann[keep]]
    k, ann = k[keep], ann[keep]
    if len(k):
        # ann is increasing, so the last occurrence of each window wins
        last_of_window = np.flatnonzero(np.append(k[1:] != k[:-1], True))
        wk, wa = k[last_of_window], ann[last_of_window]
        fire = labels[idx[wk]] == 0
        idx[wk[fire]] = wa[fire]
    return idx


def zoh_resample_index(ts: np.ndarray, labels: np.ndarray, grid: np.ndarray) -> np.ndarray:
    if len(ts) == 0 or len(grid) == 0:
        return np.zeros(len(grid), dtype=np.int64)
    return correct_missing(ts, labels, grid, zoh_index(ts, grid))


def intersect(a_s, a_e, b_s, b_e) -> tuple[np.ndarray, np.ndarray]:
    # both sides are merged, so the b intervals meeting a[i] form the contiguous range [lo[i], hi[i])
    lo = np.searchsorted(b_e, a_s, side="left")
    hi = np.searchsorted(b_s, a_e, side="right")
    counts = np.maximum(hi - lo, 0)
    i = np.repeat(np.arange(len(a_s)), counts)
    j = np.arange(len(i)) - np.repeat(np.cumsum(counts) - counts, counts) + np.repeat(lo, counts)
    return (np.maximum(a_s[i], b_s[j]).astype(np.int64, copy=False),
            np.minimum(a_e[i], b_e[j]).astype(np.int64, copy=False))


def intersection_measure(a_s, a_e, b_s, b_e) -> int:
    s, e = intersect(a_s, a_e, b_s, b_e)
    return int(np.sum(e - s))
