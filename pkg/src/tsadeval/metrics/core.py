"""Event-wise, channel/subsystem-aware, alarming-precision and timing metrics.

Multivariate annotations and detections are reduced to a *global view*: every
event becomes the logical sum of its segments over target channels, and all
detections are OR-ed into maximal segments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..datamodel import (
    PRF,
    ChannelMeta,
    DetectionSet,
    EventAnnotation,
    EventCategory,
    IntervalSet,
    MetricReport,
    TimeInterval,
    TimingScore,
    ValidationError,
    union_all,
)

log = logging.getLogger(__name__)

DEFAULT_BETA = 0.5
DEFAULT_EXCLUDED = frozenset({EventCategory.COMMUNICATION_GAP})


def fbeta_score(precision: float, recall: float, beta: float) -> float:
    if precision == 0 and recall == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


@dataclass(frozen=True)
class EvaluationContext:
    events: Sequence[EventAnnotation]
    detections: DetectionSet
    channel_meta: Sequence[ChannelMeta]
    timeline: Optional[TimeInterval] = None
    beta: float = DEFAULT_BETA
    excluded_categories: frozenset = DEFAULT_EXCLUDED
    excluded_ids: frozenset = frozenset()
    excluded_classes: frozenset = frozenset()
    excluded_types: frozenset = frozenset()  # attribute tokens, e.g. {"Point", "Local"}

    def __post_init__(self):
        if self.timeline is None:
            object.__setattr__(self, "timeline", self.detections.timeline)
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        object.__setattr__(self, "excluded_categories", frozenset(self.excluded_categories))

    @property
    def target_channels(self) -> list[str]:
        return [m.name for m in self.channel_meta if m.target]

    def is_excluded(self, ev: EventAnnotation) -> bool:
        if ev.category in self.excluded_categories or ev.id in self.excluded_ids or ev.class_ in self.excluded_classes:
            return True
        if self.excluded_types and ev.attributes is not None:
            return any(t in self.excluded_types for t in ev.attributes.tokens())
        return False

    def anomalies_only(self) -> "EvaluationContext":
        """Same context with every category except Anomaly excluded."""
        cats = frozenset(c for c in EventCategory if c is not EventCategory.ANOMALY)
        return _replace(self, excluded_categories=cats | self.excluded_categories)


def _replace(ctx: EvaluationContext, **kw) -> EvaluationContext:
    d = {f: getattr(ctx, f) for f in ctx.__dataclass_fields__}
    d.update(kw)
    return EvaluationContext(**d)


@dataclass(frozen=True)
class ScoredEvent:
    event: EventAnnotation
    span: IntervalSet  # logical sum over target channels, clipped to the timeline
    included: bool

    @property
    def start(self) -> int:
        return int(self.span.starts[0])

    @property
    def end(self) -> int:
        return int(self.span.ends[-1])


@dataclass(frozen=True)
class GlobalView:
    events: list[ScoredEvent]  # sorted by span start; included and excluded
    detections: IntervalSet
    timeline: TimeInterval

    @property
    def included(self) -> list[ScoredEvent]:
        return [e for e in self.events if e.included]

    @property
    def all_spans(self) -> IntervalSet:
        return union_all(e.span for e in self.events)

    @property
    def excluded_spans(self) -> IntervalSet:
        return union_all(e.span for e in self.events if not e.included)


def _timeline_set(t: TimeInterval) -> IntervalSet:
    return IntervalSet.from_arrays([t.start], [t.end], merged=True)


def global_view(ctx: EvaluationContext) -> GlobalView:
    """Reduce annotations and detections to channel-agnostic interval sets."""
    targets = ctx.target_channels
    window = _timeline_set(ctx.timeline)
    scored = []
    for ev in ctx.events:
        span = ev.span(targets).intersection(window)
        if len(span):
            scored.append(ScoredEvent(ev, span, not ctx.is_excluded(ev)))
    scored.sort(key=lambda e: (e.start, e.end, e.event.id))
    dets = ctx.detections.global_view(targets).intersection(window)
    return GlobalView(scored, dets, ctx.timeline)


def _overlapping_indices(dets: IntervalSet, span: IntervalSet) -> np.ndarray:
    """Indices of detection segments sharing at least one ns with any fragment of ``span``."""
    if not len(dets) or not len(span):
        return np.empty(0, dtype=np.int64)
    lo = np.searchsorted(dets.ends, span.starts, side="left")
    hi = np.searchsorted(dets.starts, span.ends, side="right")
    parts = [np.arange(a, b) for a, b in zip(lo.tolist(), hi.tolist()) if b > a]
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(parts))


@dataclass(frozen=True)
class EventMatch:
    event: ScoredEvent
    matched: bool
    segments: tuple[int, ...]  # indices into GlobalView.detections, ascending
    x_start: Optional[int]  # first overlapping segment start minus event start


@dataclass(frozen=True)
class EventMatching:
    matches: list[EventMatch]  # included events only, in span order
    tp: int
    fp: int
    fn: int
    tp_redundant: int


def match_events(view: GlobalView) -> EventMatching:
    """Count event-wise TP/FN per included event and FP per stray detection segment.

    Segments touching only excluded events are ignored entirely.
    """
    dets = view.detections
    hit = np.zeros(len(dets), dtype=bool)
    matches = []
    for se in view.events:
        idx = _overlapping_indices(dets, se.span)
        hit[idx] = True
        if not se.included:
            continue
        if len(idx):
            x = int(dets.starts[idx[0]]) - se.start
            matches.append(EventMatch(se, True, tuple(idx.tolist()), x))
        else:
            matches.append(EventMatch(se, False, (), None))
    tp = sum(m.matched for m in matches)
    return EventMatching(
        matches=matches,
        tp=tp,
        fp=int(np.count_nonzero(~hit)),
        fn=len(matches) - tp,
        tp_redundant=sum(len(m.segments) - 1 for m in matches if m.matched),
    )


def corrected_event_fbeta(view: GlobalView, matching: EventMatching, beta: float = DEFAULT_BETA) -> dict:
    """Event-wise precision scaled by the time-domain true negative rate.

    Every event span (included or excluded) is removed from the nominal time.
    """
    tl = view.timeline
    if tl.duration <= 0:
        raise ValidationError("evaluation timeline has zero length")
    window = _timeline_set(tl)
    spans = view.all_spans
    nominal = tl.duration - spans.intersection_duration(window)
    det_nominal = view.detections.intersection_duration(window) - view.detections.intersection_duration(spans)
    tn = nominal - det_nominal
    # no nominal time at all: nothing can be a false alarm in time
    tnr = tn / nominal if nominal > 0 else 1.0
    tp, fp, fn = matching.tp, matching.fp, matching.fn
    precision = tp / (tp + fp) * tnr if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return {"precision": precision, "recall": recall, "fbeta": fbeta_score(precision, recall, beta),
            "tnr": tnr, "tn_ns": tn, "nominal_ns": nominal}


# --- subsystem- and channel-aware scores ---------------------------------------

def _aware_counts(ctx: EvaluationContext, view: GlobalView, level: str) -> tuple[int, int, int]:
    """Micro-summed TP/FP/FN at channel or subsystem granularity."""
    targets = ctx.target_channels
    group = {m.name: (m.subsystem if level == "subsystem" else m.name) for m in ctx.channel_meta if m.target}
    window = _timeline_set(view.timeline)
    dets = {c: s.intersection(window) for c, s in ctx.detections.per_channel.items() if c in group}

    adjusted = []
    for se in view.events:
        ev = se.event
        segs = {c: s.widen_points(1) for c, s in ev.segments.items() if c in group and len(s)}
        span = union_all(segs.values())
        adjusted.append((se, span, {group[c] for c in segs}))

    def detected_by(span: IntervalSet) -> dict[str, IntervalSet]:
        """Channels with detections overlapping ``span`` -> the overlapping detection segments."""
        out = {}
        for c, d in dets.items():
            idx = _overlapping_indices(d, span)
            if len(idx):
                out[c] = IntervalSet.from_arrays(d.starts[idx], d.ends[idx], merged=True)
        return out

    tp = fp = fn = 0
    for i, (se, span, annotated) in enumerate(adjusted):
        if not se.included:
            continue
        hits = detected_by(span)
        detected_groups: dict[str, list[str]] = {}
        for c in hits:
            detected_groups.setdefault(group[c], []).append(c)
        tp += len(annotated & detected_groups.keys())
        fn += len(annotated - detected_groups.keys())
        for g in detected_groups.keys() - annotated:
            # discard if the same detection correctly detects another overlapping event in g
            attributable = False
            for j, (se2, span2, annotated2) in enumerate(adjusted):
                if j == i or g not in annotated2 or not len(span.intersection(span2)):
                    continue
                if any(len(_overlapping_indices(hits[c], span2)) for c in detected_groups[g]):
                    attributable = True
                    break
            if not attributable:
                fp += 1
    return tp, fp, fn


def _aware_prf(counts: tuple[int, int, int], beta: float) -> PRF:
    tp, fp, fn = counts
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return PRF(p, r, fbeta_score(p, r, beta))


def channel_aware_fbeta(ctx: EvaluationContext, view: Optional[GlobalView] = None) -> Optional[PRF]:
    """Precision/recall of identifying affected channels; None when detections carry no channels."""
    if not ctx.detections.has_channels:
        return None
    return _aware_prf(_aware_counts(ctx, view or global_view(ctx), "channel"), ctx.beta)


def subsystem_aware_fbeta(ctx: EvaluationContext, view: Optional[GlobalView] = None) -> Optional[PRF]:
    """Like :func:`channel_aware_fbeta` per subsystem; None with fewer than two target subsystems."""
    if not ctx.detections.has_channels:
        return None
    if len({m.subsystem for m in ctx.channel_meta if m.target}) < 2:
        return None
    return _aware_prf(_aware_counts(ctx, view or global_view(ctx), "subsystem"), ctx.beta)


# --- alarming precision and timing ---------------------------------------------

def alarming_precision(matching: EventMatching) -> float:
    """TP_e / (TP_e + redundant segments); 1.0 when nothing was detected."""
    if matching.tp == 0:
        return 1.0
    return matching.tp / (matching.tp + matching.tp_redundant)


def adtqc_value(x: float, alpha: float, beta_len: float) -> float:
    """Timing quality of a detection starting ``x`` ns after the event start.

    Early detections decay as ((x + alpha) / alpha)^e, late ones as
    1 / (1 + (x / (beta_len - x))^e). With a zero-width side only the exact
    start scores.
    """
    if alpha < 0 or beta_len < 0:
        raise ValueError("alpha and beta_len must be non-negative")
    if (alpha == 0 and x <= 0) or (beta_len == 0 and x >= 0):
        return 1.0 if x == 0 else 0.0
    if x <= -alpha or x >= beta_len:
        return 0.0
    if x <= 0:
        return ((x + alpha) / alpha) ** math.e
    return 1.0 / (1.0 + (x / (beta_len - x)) ** math.e)


def adtqc_score(view: GlobalView, matching: EventMatching) -> TimingScore:
    """Mean timing quality over detected events, plus the share detected at or after the start."""
    values, after = [], 0
    prev_start = None
    for m in matching.matches:
        se = m.event
        length = se.end - se.start
        alpha = length if prev_start is None else min(length, se.start - prev_start)
        prev_start = se.start
        if not m.matched:
            continue
        values.append(adtqc_value(m.x_start, alpha, length))
        after += m.x_start >= 0
    if not values:
        return TimingScore(0.0, 0.0)
    return TimingScore(float(np.mean(values)), after / len(values))


# --- everything --------------------------------------------------------------

def evaluate(ctx: EvaluationContext, *, anomalies_only: bool = False, algorithm: str = "") -> MetricReport:
    """Compute every applicable metric for one detection set."""
    from .affiliation import affiliation_fbeta

    if anomalies_only:
        ctx = ctx.anomalies_only()
    view = global_view(ctx)
    matching = match_events(view)
    ev = corrected_event_fbeta(view, matching, ctx.beta)
    sa = subsystem_aware_fbeta(ctx, view)
    ca = channel_aware_fbeta(ctx, view)
    if not ctx.detections.has_channels:
        log.info("detections carry no channel attribution; channel/subsystem scores not available")
    return MetricReport(
        event_f=PRF(ev["precision"], ev["recall"], ev["fbeta"]),
        subsystem_f=sa,
        channel_f=ca,
        alarming_precision=alarming_precision(matching),
        adtqc=adtqc_score(view, matching),
        affiliation=affiliation_fbeta(view, ctx.beta),
        beta=ctx.beta,
        excluded_categories=sorted(c.value for c in ctx.excluded_categories),
        algorithm=algorithm,
    )
