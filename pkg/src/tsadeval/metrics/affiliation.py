"""Affiliation precision/recall over event zones.

The timeline is split into zones around annotated fragments (borders at the
midpoints between neighbouring fragments). Inside each zone, a predicted
point scores by how unlikely a uniformly random point of the zone would be
to land that close to the ground truth, and symmetrically for recall.
Both integrals are piecewise linear and are evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..datamodel import PRF
from .core import GlobalView, fbeta_score

EMPTY_ZONE_PRECISION = 0.5  # mean precision of a random predicted point


@dataclass(frozen=True)
class Zone:
    lo: float
    hi: float
    gt: tuple[float, float]
    ids: frozenset


def _anchors(view: GlobalView) -> list[tuple[int, int, set, bool]]:
    """Point-widened fragments of all events; overlapping ones merge and pool their ids."""
    raw = []
    for se in view.events:
        w = se.span.widen_points(1)
        for s, e in zip(w.starts.tolist(), w.ends.tolist()):
            raw.append((s, e, se.event.id, se.included))
    raw.sort()
    merged: list[list] = []
    for s, e, eid, inc in raw:
        if merged and s <= merged[-1][1]:
            m = merged[-1]
            m[1] = max(m[1], e)
            if inc:
                m[2].add(eid)
        else:
            merged.append([s, e, {eid} if inc else set()])
    return [(s, e, ids, bool(ids)) for s, e, ids in merged]


def build_zones(view: GlobalView) -> list[Zone]:
    anchors = _anchors(view)
    t0 = view.timeline.start
    end = float(view.timeline.end - t0)
    zones = []
    for i, (s, e, ids, _) in enumerate(anchors):
        lo = 0.0 if i == 0 else (anchors[i - 1][1] - t0 + s - t0) / 2
        hi = end if i == len(anchors) - 1 else (e - t0 + anchors[i + 1][0] - t0) / 2
        zones.append(Zone(lo, hi, (float(s - t0), float(min(e - t0, end))), frozenset(ids)))
    return zones


def _side_integral(d_lo, d_hi, jlen, margin, elen):
    """Integral over distances [d_lo, d_hi] of 1 - (jlen + d + min(d, margin)) / elen."""
    def g(t):
        return np.where(t <= margin, t * t / 2, margin * t - margin * margin / 2)
    return ((d_hi - d_lo) * (1 - jlen / elen) - (d_hi ** 2 - d_lo ** 2) / (2 * elen)
            - (g(d_hi) - g(d_lo)) / elen)


def _precision_point(x, j0, j1, e0, e1):
    elen, jlen = e1 - e0, j1 - j0
    if j0 <= x <= j1:
        return 1.0
    if x < j0:
        d = j0 - x
        return 1 - (jlen + d + min(d, e1 - j1)) / elen
    d = x - j1
    return 1 - (jlen + d + min(d, j0 - e0)) / elen


def zone_precision(preds: np.ndarray, gt: tuple[float, float], zone: tuple[float, float]) -> Optional[float]:
    """Mean precision over predicted points clipped to the zone; None without predictions.

    ``preds`` is an (n, 2) array of disjoint closed intervals inside the zone.
    """
    if len(preds) == 0:
        return None
    a, b = preds[:, 0].astype(float), preds[:, 1].astype(float)
    (j0, j1), (e0, e1) = gt, zone
    elen, jlen = e1 - e0, j1 - j0
    total = float(np.sum(b - a))
    if total == 0:
        return float(np.mean([_precision_point(x, j0, j1, e0, e1) for x in a]))
    # part before the ground truth: distance runs from j0 - min(b, j0) up to j0 - a
    la, lb = np.minimum(a, j0), np.minimum(b, j0)
    left = np.where(lb > la, _side_integral(j0 - lb, j0 - la, jlen, e1 - j1, elen), 0.0)
    ra, rb = np.maximum(a, j1), np.maximum(b, j1)
    right = np.where(rb > ra, _side_integral(ra - j1, rb - j1, jlen, j0 - e0, elen), 0.0)
    inside = np.clip(np.minimum(b, j1) - np.maximum(a, j0), 0, None)
    return float((left.sum() + right.sum() + inside.sum()) / total)


def _recall_point(y, preds, e0, e1):
    a, b = preds[:, 0], preds[:, 1]
    d = float(np.min(np.maximum(np.maximum(a - y, y - b), 0)))
    return 1 - (min(d, y - e0) + min(d, e1 - y)) / (e1 - e0)


def zone_recall(preds: np.ndarray, gt: tuple[float, float], zone: tuple[float, float]) -> float:
    """Mean recall over ground-truth points of the zone; 0 without predictions."""
    if len(preds) == 0:
        return 0.0
    (j0, j1), (e0, e1) = gt, zone
    if j1 == j0:
        return _recall_point(j0, preds, e0, e1)
    a, b = preds[:, 0].astype(float), preds[:, 1].astype(float)
    # kinks: prediction ends, Voronoi borders between predictions, and where the
    # distance meets the margin to a zone border
    knots = np.concatenate([a, b, (b[:-1] + a[1:]) / 2, (a + e0) / 2, (b + e1) / 2, [j0, j1]])
    knots = np.unique(np.clip(knots, j0, j1))
    lo, hi = knots[:-1], knots[1:]
    mids = (lo + hi) / 2
    # nearest prediction distance at each midpoint
    k = np.searchsorted(a, mids, side="right") - 1
    d_right = np.where(k + 1 < len(a), a[np.minimum(k + 1, len(a) - 1)] - mids, np.inf)
    d_left = np.where(k >= 0, np.maximum(mids - b[np.maximum(k, 0)], 0), np.inf)
    d = np.minimum(d_left, d_right)
    vals = 1 - (np.minimum(d, mids - e0) + np.minimum(d, e1 - mids)) / (e1 - e0)
    return float(np.sum(vals * (hi - lo)) / (j1 - j0))


def _zone_predictions(dets: np.ndarray, zone: Zone) -> np.ndarray:
    if len(dets) == 0:
        return dets
    m = (dets[:, 1] >= zone.lo) & (dets[:, 0] <= zone.hi)
    p = dets[m].copy()
    np.clip(p, zone.lo, zone.hi, out=p)
    return p[p[:, 1] >= p[:, 0]]


def affiliation_per_zone(view: GlobalView) -> list[tuple[Zone, Optional[float], float]]:
    t0 = view.timeline.start
    w = view.detections.widen_points(1)
    dets = np.column_stack([(w.starts - t0).astype(float), (w.ends - t0).astype(float)]) if len(w) \
        else np.empty((0, 2))
    # widening may push the last point past the timeline end
    if len(dets):
        dets[:, 1] = np.minimum(dets[:, 1], float(view.timeline.end - t0))
    out = []
    for z in build_zones(view):
        if not z.ids:
            continue
        p = _zone_predictions(dets, z)
        out.append((z, zone_precision(p, z.gt, (z.lo, z.hi)), zone_recall(p, z.gt, (z.lo, z.hi))))
    return out


def affiliation_fbeta(view: GlobalView, beta: float) -> Optional[PRF]:
    """Per-event affiliation averaged over included events; None if there are none."""
    per_id: dict[str, tuple[list, list]] = {}
    for z, p, r in affiliation_per_zone(view):
        p = EMPTY_ZONE_PRECISION if p is None else p
        for eid in z.ids:
            ps, rs = per_id.setdefault(eid, ([], []))
            ps.append(p)
            rs.append(r)
    if not per_id:
        return None
    precisions, recalls, fs = [], [], []
    for ps, rs in per_id.values():
        p, r = float(np.mean(ps)), float(np.mean(rs))
        precisions.append(p)
        recalls.append(r)
        fs.append(fbeta_score(p, r, beta))
    return PRF(float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(fs)))


__all__: Sequence[str] = ["Zone", "build_zones", "zone_precision", "zone_recall", "affiliation_per_zone",
                          "affiliation_fbeta"]
