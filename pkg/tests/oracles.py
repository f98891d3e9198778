"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import numpy as np


def runs(mask):
    """Inclusive (first, last) index pairs of True runs, by plain iteration."""
    out, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(mask) - 1))
    return out


def paint(intervals, size):
    """Closed integer intervals painted on a doubled grid.

    Doubling keeps [0, 2] and [3, 5] apart (cells 4 and 6 are split by the
    empty cell 5) while [0, 2] and [2, 4] still share a cell.
    """
    m = np.zeros(2 * size + 1, dtype=bool)
    for s, e in intervals:
        m[2 * s:2 * e + 1] = True
    return m


def brute_force_matching(events, detections, size):
    """Event-wise counts by painting every interval on a fine grid.

    ``events`` is a list of (included, {channel: [(s, e), ...]}); detections is
    {channel: [(s, e), ...]}. Returns (tp, fp, fn, tp_redundant).
    """
    det = np.zeros(2 * size + 1, dtype=bool)
    for ivs in detections.values():
        det |= paint(ivs, size)
    segs = runs(det)
    masks = []
    for included, per_ch in events:
        m = np.zeros_like(det)
        for ivs in per_ch.values():
            m |= paint(ivs, size)
        masks.append((included, m))
    tp = fn = red = 0
    for included, m in masks:
        if not m.any() or not included:
            continue
        hits = [seg for seg in segs if m[seg[0]:seg[1] + 1].any()]
        if hits:
            tp += 1
            red += len(hits) - 1
        else:
            fn += 1
    fp = sum(1 for a, b in segs if not any(m[a:b + 1].any() for _, m in masks))
    return tp, fp, fn, red


def zscore_flags(values, mean, std, n):
    """Per-sample loop: flagged iff the deviation is strictly beyond n standard deviations."""
    out = []
    for x in values:
        dev = abs(x - mean)
        out.append(dev > n * std)
    return np.array(out, dtype=bool)


def affiliation_zone_numeric(preds, gt, zone, n=20001):
    """Precision and recall of one zone straight from the probabilistic definition.

    Distances and survival probabilities are evaluated on dense grids; the
    survival function of a uniform point of the zone is estimated from its own
    dense sample, so nothing here shares code with the closed form.
    """
    e0, e1 = zone
    j0, j1 = gt
    xs = np.linspace(e0, e1, n)
    dist_to_gt = np.maximum(np.maximum(j0 - xs, xs - j1), 0)
    sorted_gt = np.sort(dist_to_gt)

    def survival_gt(d):
        return 1 - np.searchsorted(sorted_gt, d, side="left") / len(sorted_gt)

    def dist_to_set(y):
        return np.min([max(a - y, y - b, 0.0) for a, b in preds])

    # precision: midpoints of fine cells over the prediction intervals, weighted by cell length
    pts, weights = [], []
    for a, b in preds:
        if b > a:
            k = max(64, int(4000 * (b - a) / (e1 - e0)))
            pts.append(a + (b - a) * (np.arange(k) + 0.5) / k)
            weights.append(np.full(k, (b - a) / k))
    if not pts:  # only zero-length predictions: plain mean over them
        pts = [np.array([a for a, _ in preds], dtype=float)]
        weights = [np.ones(len(preds))]
    pts, weights = np.concatenate(pts), np.concatenate(weights)
    d_pts = np.maximum(np.maximum(j0 - pts, pts - j1), 0)
    precision = float(np.sum(survival_gt(d_pts) * weights) / np.sum(weights))

    ys = np.linspace(j0, j1, 801) if j1 > j0 else np.array([j0])
    rec = []
    for y in ys:
        d = dist_to_set(y)
        rec.append(np.mean(np.abs(xs - y) >= d))
    return precision, float(np.mean(rec))


def reference_rank(rows):
    """Rank rows of score tuples best-first with Python's tuple ordering and competition ranks."""
    order = sorted(range(len(rows)), key=lambda i: ([-v for v in rows[i][1]], rows[i][0]))
    ranks, prev = {}, None
    for pos, i in enumerate(order):
        if rows[i][1] != prev:
            rank, prev = pos + 1, rows[i][1]
        ranks[rows[i][0]] = rank
    return [rows[i][0] for i in order], ranks
