"""Dataset splits, mission phases, end-to-end evaluation and hierarchical ranking."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .dataset_io import MissionDataset
from .datamodel import (
    NS_PER_DAY,
    DetectionSet,
    EventAnnotation,
    EventCategory,
    MetricReport,
    TimeInterval,
    ValidationError,
)
from .metrics import EvaluationContext, evaluate
from .metrics.core import DEFAULT_BETA, DEFAULT_EXCLUDED
from .taxonomy import infer_all

MONTH = 30 * NS_PER_DAY
WEEK = 7 * NS_PER_DAY


# --- splits -------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    validation_tail: int = 3 * MONTH

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValidationError("train_fraction must be in (0, 1]")
        if self.validation_tail < 0:
            raise ValidationError("validation_tail must be non-negative")


@dataclass(frozen=True)
class Split:
    train: TimeInterval
    validation: Optional[TimeInterval]
    test: TimeInterval
    indices: Mapping[str, Mapping[str, tuple[int, int]]]  # channel -> set -> [lo, hi)
    events: Mapping[str, tuple[str, ...]]  # set -> event ids

    @property
    def training_half(self) -> TimeInterval:
        end = self.validation.end if self.validation is not None else self.train.end
        return TimeInterval(self.train.start, end)


def _event_start(ev: EventAnnotation) -> Optional[int]:
    span = ev.span()
    return int(span.starts[0]) if len(span) else None


def _assemble(ds: MissionDataset, sets: dict[str, Optional[TimeInterval]]) -> Split:
    idx = {}
    for name, s in ds.channels.items():
        per = {}
        for key, w in sets.items():
            if w is None:
                per[key] = (0, 0)
                continue
            lo = int(np.searchsorted(s.timestamps, w.start, side="left"))
            hi = int(np.searchsorted(s.timestamps, w.end, side="right"))
            per[key] = (lo, hi)
        idx[name] = per
    evs: dict[str, list[str]] = {k: [] for k in sets}
    for ev in ds.events:
        t = _event_start(ev)
        for key, w in sets.items():
            if t is not None and w is not None and w.start <= t <= w.end:
                evs[key].append(ev.id)
                break
    return Split(sets["train"], sets["validation"], sets["test"], idx, {k: tuple(v) for k, v in evs.items()})


def _boundaries(ds: MissionDataset, fraction: float) -> tuple[int, int, int]:
    span = ds.time_span()
    mid = span.start + round(fraction * span.duration)
    return span.start, mid, span.end


def split_mission(ds: MissionDataset, spec: SplitSpec = SplitSpec()) -> Split:
    """Time-based train / validation / test split.

    The training part is [start, mid) with its last ``validation_tail`` ns used
    for validation; the test part is [mid, end]. Events go to the set holding
    their start.
    """
    if not ds.channels:
        raise ValidationError("empty dataset")
    start, mid, end = _boundaries(ds, spec.train_fraction)
    if mid >= end:
        raise ValidationError("train_fraction leaves no test data")
    if spec.validation_tail >= mid - start:
        raise ValidationError("validation tail does not fit into the training part")
    val_start = mid - spec.validation_tail
    sets = {
        "train": TimeInterval(start, val_start - 1),
        "validation": TimeInterval(val_start, mid - 1) if spec.validation_tail else None,
        "test": TimeInterval(mid, end),
    }
    return _assemble(ds, sets)


@dataclass(frozen=True)
class PhaseSpec:
    phases: tuple[tuple[int, int], ...]  # (train duration, validation duration) from mission start

    def __post_init__(self):
        if not self.phases:
            raise ValidationError("a phase spec needs at least one phase")
        totals = [t + v for t, v in self.phases]
        if any(t <= 0 or v < 0 for t, v in self.phases):
            raise ValidationError("phase durations must be positive")
        if any(b <= a for a, b in zip(totals, totals[1:])):
            raise ValidationError("phase durations must increase strictly")


MISSION1_PHASES = PhaseSpec(((9 * WEEK, 3 * WEEK), (8 * MONTH, 2 * MONTH), (18 * MONTH, 3 * MONTH),
                             (39 * MONTH, 3 * MONTH), (81 * MONTH, 3 * MONTH)))
MISSION2_PHASES = PhaseSpec(((3 * WEEK, 1 * WEEK), (4 * MONTH, 1 * MONTH), (8 * MONTH, 2 * MONTH),
                             (18 * MONTH, 3 * MONTH)))
DEFAULT_PHASES = {"mission1": MISSION1_PHASES, "mission2": MISSION2_PHASES}


def phase_splits(ds: MissionDataset, spec: PhaseSpec, train_fraction: float = 0.5) -> list[Split]:
    """One split per phase; the test part is always the canonical second half."""
    start, mid, end = _boundaries(ds, train_fraction)
    out = []
    for k, (tr, va) in enumerate(spec.phases, 1):
        if tr + va > mid - start:
            raise ValidationError(f"phase {k} exceeds the training half")
        sets = {
            "train": TimeInterval(start, start + tr - 1),
            "validation": TimeInterval(start + tr, start + tr + va - 1) if va else None,
            "test": TimeInterval(mid, end),
        }
        out.append(_assemble(ds, sets))
    return out


# --- evaluation ---------------------------------------------------------------

ATTRIBUTE_TOKENS = frozenset({"Univariate", "Multivariate", "Global", "Local", "Point", "Subsequence"})


@dataclass(frozen=True)
class EvalOptions:
    beta: float = DEFAULT_BETA
    excluded_categories: frozenset = DEFAULT_EXCLUDED
    excluded_ids: frozenset = frozenset()
    excluded_classes: frozenset = frozenset()
    excluded_types: frozenset = frozenset()
    channels: Optional[tuple[str, ...]] = None  # evaluate on this channel subset only
    anomalies_only: bool = False
    window: Optional[TimeInterval] = None  # only events starting here; spans clipped to it
    algorithm: str = ""

    @classmethod
    def with_exclusions(cls, tokens: Iterable[str], **kw) -> "EvalOptions":
        """Parse exclusion tokens: a category, an attribute, ``id:<ID>`` or ``class:<name>``."""
        cats, ids, classes, types = set(DEFAULT_EXCLUDED), set(), set(), set()
        for tok in tokens:
            if tok.startswith("id:"):
                ids.add(tok[3:])
            elif tok.startswith("class:"):
                classes.add(tok[6:])
            elif tok in ATTRIBUTE_TOKENS:
                types.add(tok)
            else:
                try:
                    cats.add(EventCategory.parse(tok))
                except ValueError as exc:
                    raise ValidationError(f"unknown exclusion {tok!r}") from exc
        return cls(excluded_categories=frozenset(cats), excluded_ids=frozenset(ids),
                   excluded_classes=frozenset(classes), excluded_types=frozenset(types), **kw)


def _restrict_to_subset(ds: MissionDataset, subset: Sequence[str]) -> tuple[list, list[EventAnnotation]]:
    names = {m.name for m in ds.channel_meta}
    missing = [c for c in subset if c not in names]
    if missing:
        raise ValidationError(f"unknown channel(s) in subset: {', '.join(missing)}")
    keep = set(subset)
    meta = [m for m in ds.channel_meta if m.name in keep]
    events = [ev.restricted(keep) for ev in ds.events]
    events = [ev for ev in events if ev.channels]
    series = {c: s for c, s in ds.channels.items() if c in keep}
    if series:
        inferred = infer_all(events, series)
        events = [ev.with_attributes(inferred.get(ev.id, ev.attributes)) if ev.category.has_attributes else ev
                  for ev in events]
    return meta, events


def run_evaluation(ds: MissionDataset, detections: DetectionSet, opts: EvalOptions = EvalOptions()) -> MetricReport:
    """Score one detection set against the dataset's annotations."""
    names = {m.name for m in ds.channel_meta}
    unknown = sorted(set(detections.per_channel) - names)
    if unknown:
        raise ValidationError(f"detections name channels unknown to the dataset: {', '.join(unknown)}")
    meta, events = ds.channel_meta, list(ds.events)
    if opts.channels is not None:
        meta, events = _restrict_to_subset(ds, opts.channels)
        keep = set(opts.channels)
        detections = DetectionSet({c: s for c, s in detections.per_channel.items() if c in keep},
                                  detections.timeline, detections.global_only)
    timeline = detections.timeline
    if opts.window is not None:
        timeline = opts.window
        events = [ev for ev in events if (t := _event_start(ev)) is not None and timeline.start <= t <= timeline.end]
        detections = DetectionSet({c: s.clip(timeline) for c, s in detections.per_channel.items()},
                                  timeline, detections.global_only.clip(timeline))
    ctx = EvaluationContext(events, detections, meta, timeline, opts.beta, opts.excluded_categories,
                            opts.excluded_ids, opts.excluded_classes, opts.excluded_types)
    return evaluate(ctx, anomalies_only=opts.anomalies_only, algorithm=opts.algorithm)


# --- ranking ------------------------------------------------------------------

LEVELS = ("event_f.fbeta", "subsystem_f.fbeta", "channel_f.fbeta", "alarming_precision", "adtqc.score",
          "affiliation.fbeta")


def round_sig(x: float, digits: int = 3) -> float:
    """Round to ``digits`` significant digits."""
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True)
class RankedResult:
    algorithm: str
    scores: tuple[Optional[float], ...]  # rounded, in LEVELS order; None for skipped levels
    rank: int
    levels: tuple[str, ...] = field(default=LEVELS, compare=False)


def hierarchical_rank(reports: Sequence[MetricReport]) -> list[RankedResult]:
    """Order reports lexicographically over rounded priority scores, best first.

    A level missing from any report is skipped for all of them. Fully tied
    reports share the same (competition) rank.
    """
    if not reports:
        raise ValidationError("nothing to rank")
    flat = [r.scores() for r in reports]
    used = []
    for lvl in LEVELS:
        if any(f.get(lvl) is None for f in flat):
            warnings.warn(f"level {lvl} unavailable for some reports; skipped for all", stacklevel=2)
        else:
            used.append(lvl)
    rows = []
    for r, f in zip(reports, flat):
        key = tuple(round_sig(f[lvl]) if lvl in used else None for lvl in LEVELS)
        rows.append((r.algorithm, key))

    def sort_key(row):
        return tuple(-v for v in row[1] if v is not None), row[0]
    rows.sort(key=sort_key)
    out, prev, rank = [], None, 0
    for i, (name, key) in enumerate(rows):
        if key != prev:
            rank, prev = i + 1, key
        out.append(RankedResult(name, key, rank))
    return out
