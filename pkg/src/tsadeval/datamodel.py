"""Core domain types shared by every module.

Timestamps are signed 64-bit nanosecond counts since the Unix epoch (UTC),
which covers 1678-2262 at nanosecond resolution. All intervals are closed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from . import kernels

Timestamp = int

NS_PER_S = 1_000_000_000
NS_PER_DAY = 86_400 * NS_PER_S
INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class ValidationError(ValueError):
    """Raised when data violates a domain invariant."""


@dataclass(frozen=True, slots=True, order=True)
class TimeInterval:
    start: int
    end: int

    def __post_init__(self):
        if not (INT64_MIN <= self.start <= INT64_MAX and INT64_MIN <= self.end <= INT64_MAX):
            raise ValidationError(f"timestamp out of int64 range: {self}")
        if self.end < self.start:
            raise ValidationError(f"interval end before start: [{self.start}, {self.end}]")

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def is_point(self) -> bool:
        return self.start == self.end


class IntervalSet:
    """Immutable, sorted, merged set of closed nanosecond intervals.

    Intervals that overlap or share a boundary are merged on construction, so
    no two stored intervals touch. Backed by two ``int64`` arrays.
    """

    __slots__ = ("_s", "_e")

    def __init__(self, intervals: Iterable[TimeInterval | tuple[int, int]] = ()):
        pairs = [(iv.start, iv.end) if isinstance(iv, TimeInterval) else (int(iv[0]), int(iv[1]))
                 for iv in intervals]
        for s, e in pairs:
            if e < s:
                raise ValidationError(f"interval end before start: [{s}, {e}]")
        if pairs:
            arr = np.array(pairs, dtype=np.int64)
            s, e = arr[:, 0], arr[:, 1]
        else:
            s = e = np.empty(0, dtype=np.int64)
        self._set(*self._normalize(s, e))

    def _set(self, s: np.ndarray, e: np.ndarray) -> None:
        s.flags.writeable = False
        e.flags.writeable = False
        self._s, self._e = s, e

    @staticmethod
    def _normalize(s: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if len(s) > 1 and np.any(s[1:] < s[:-1]):
            order = np.lexsort((e, s))
            s, e = s[order], e[order]
        return kernels.merge_sorted(s, e)

    @classmethod
    def from_arrays(cls, starts, ends, *, merged: bool = False) -> "IntervalSet":
        """Build from start/end arrays. ``merged=True`` skips normalisation (caller guarantees it)."""
        s = np.array(starts, dtype=np.int64)
        e = np.array(ends, dtype=np.int64)
        if s.shape != e.shape or s.ndim != 1:
            raise ValueError("starts and ends must be 1-D arrays of equal length")
        if np.any(e < s):
            raise ValidationError("interval end before start")
        out = cls.__new__(cls)
        out._set(*((s, e) if merged else cls._normalize(s, e)))
        return out

    @property
    def starts(self) -> np.ndarray:
        return self._s

    @property
    def ends(self) -> np.ndarray:
        return self._e

    def __len__(self) -> int:
        return len(self._s)

    def __iter__(self) -> Iterator[TimeInterval]:
        for s, e in zip(self._s.tolist(), self._e.tolist()):
            yield TimeInterval(s, e)

    def __bool__(self) -> bool:
        return len(self._s) > 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self._s, other._s) and np.array_equal(self._e, other._e)

    def __hash__(self) -> int:
        return hash((self._s.tobytes(), self._e.tobytes()))

    def __repr__(self) -> str:
        body = ", ".join(f"[{s},{e}]" for s, e in zip(self._s.tolist(), self._e.tolist()))
        return f"IntervalSet({body})"

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return interval_union(self, other)

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        s, e = kernels.intersect(self._s, self._e, other._s, other._e)
        return IntervalSet.from_arrays(s, e, merged=True)

    def intersection_duration(self, other: "IntervalSet") -> int:
        return kernels.intersection_measure(self._s, self._e, other._s, other._e)

    def intersects(self, interval: TimeInterval) -> bool:
        i = np.searchsorted(self._e, interval.start, side="left")
        return bool(i < len(self._s) and self._s[i] <= interval.end)

    def overlapping(self, interval: TimeInterval) -> tuple[int, int]:
        """Index range [lo, hi) of stored intervals sharing at least one ns with ``interval``."""
        lo = int(np.searchsorted(self._e, interval.start, side="left"))
        hi = int(np.searchsorted(self._s, interval.end, side="right"))
        return lo, max(lo, hi)

    def clip(self, window: TimeInterval) -> "IntervalSet":
        return self.intersection(IntervalSet.from_arrays([window.start], [window.end], merged=True))

    def widen_points(self, ns: int = 1) -> "IntervalSet":
        """Extend zero-length intervals so that they end ``ns`` later."""
        e = np.where(self._e == self._s, self._e + ns, self._e)
        return IntervalSet.from_arrays(self._s, e)

    def hull(self) -> Optional[TimeInterval]:
        if not len(self._s):
            return None
        return TimeInterval(int(self._s[0]), int(self._e[-1]))

    @property
    def total_duration(self) -> int:
        return int(np.sum(self._e - self._s))


def interval_union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    """Minimal merged set covering exactly a ∪ b."""
    return IntervalSet.from_arrays(np.concatenate((a.starts, b.starts)),
                                   np.concatenate((a.ends, b.ends)))


def union_all(sets: Iterable[IntervalSet]) -> IntervalSet:
    sets = list(sets)
    if not sets:
        return IntervalSet()
    return IntervalSet.from_arrays(np.concatenate([s.starts for s in sets]),
                                   np.concatenate([s.ends for s in sets]))


def interval_intersects(a: TimeInterval, b: TimeInterval) -> bool:
    """True iff the closed ranges share at least one nanosecond."""
    return a.start <= b.end and b.start <= a.end


def total_duration(s: IntervalSet) -> int:
    """Sum of ``end - start`` over a merged set; point intervals contribute 0."""
    return s.total_duration


class EventCategory(enum.Enum):
    ANOMALY = "Anomaly"
    RARE_NOMINAL = "RareNominal"
    COMMUNICATION_GAP = "CommunicationGap"
    INVALID_SEGMENT = "InvalidSegment"

    @classmethod
    def parse(cls, token: str) -> "EventCategory":
        for c in cls:
            if c.value.lower() == token.strip().lower():
                return c
        raise ValidationError(f"unknown event category {token!r}")

    @property
    def has_attributes(self) -> bool:
        return self in (EventCategory.ANOMALY, EventCategory.RARE_NOMINAL)


class Dimensionality(enum.Enum):
    UNIVARIATE = "Univariate"
    MULTIVARIATE = "Multivariate"


class Locality(enum.Enum):
    LOCAL = "Local"
    GLOBAL = "Global"


class Length(enum.Enum):
    POINT = "Point"
    SUBSEQUENCE = "Subsequence"


def _parse_enum(cls, token: str):
    for c in cls:
        if c.value.lower() == token.strip().lower():
            return c
    raise ValidationError(f"unknown {cls.__name__} token {token!r}")


@dataclass(frozen=True, slots=True)
class AnomalyTypeAttributes:
    dimensionality: Dimensionality
    locality: Locality
    length: Length

    @classmethod
    def parse(cls, dim: str, loc: str, length: str) -> "AnomalyTypeAttributes":
        return cls(_parse_enum(Dimensionality, dim), _parse_enum(Locality, loc),
                   _parse_enum(Length, length))

    def tokens(self) -> tuple[str, str, str]:
        return self.dimensionality.value, self.locality.value, self.length.value


class ChannelKind(enum.Enum):
    AUTO = "Auto"
    CONTINUOUS = "Continuous"
    BINARY = "Binary"
    CONSTANT = "Constant"
    MONOTONIC = "Monotonic"
    CATEGORICAL = "Categorical"

    @classmethod
    def parse(cls, token: str) -> "ChannelKind":
        if not token.strip():
            return cls.AUTO
        return _parse_enum(cls, token)


@dataclass(frozen=True, slots=True)
class ChannelMeta:
    name: str
    subsystem: str
    group: int
    unit: str
    target: bool
    kind: ChannelKind = ChannelKind.AUTO


@dataclass(frozen=True)
class EventAnnotation:
    """One annotated event; ``segments`` maps channel name to its interval set."""

    id: str
    category: EventCategory
    class_: str = ""
    subclass: str = ""
    segments: Mapping[str, IntervalSet] = field(default_factory=dict)
    attributes: Optional[AnomalyTypeAttributes] = None

    def __post_init__(self):
        object.__setattr__(self, "segments", MappingProxyType(dict(self.segments)))

    @property
    def channels(self) -> list[str]:
        return [c for c, s in self.segments.items() if len(s)]

    def span(self, channels: Optional[Iterable[str]] = None) -> IntervalSet:
        """Logical sum of the event's segments over ``channels`` (all if None)."""
        if channels is None:
            return union_all(self.segments.values())
        keep = set(channels)
        return union_all(s for c, s in self.segments.items() if c in keep)

    def restricted(self, channels: Iterable[str]) -> "EventAnnotation":
        keep = set(channels)
        return EventAnnotation(self.id, self.category, self.class_, self.subclass,
                               {c: s for c, s in self.segments.items() if c in keep},
                               self.attributes)

    def with_attributes(self, attributes: Optional[AnomalyTypeAttributes]) -> "EventAnnotation":
        return EventAnnotation(self.id, self.category, self.class_, self.subclass,
                               self.segments, attributes)


class ChannelSeries:
    """Strictly time-ordered, finite samples of one channel."""

    __slots__ = ("channel", "timestamps", "values")

    def __init__(self, channel: str, timestamps, values):
        ts = np.array(timestamps, dtype=np.int64)
        vs = np.array(values, dtype=np.float64)
        if ts.shape != vs.shape or ts.ndim != 1:
            raise ValidationError(f"{channel}: timestamps and values differ in length")
        if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
            bad = int(np.flatnonzero(ts[1:] <= ts[:-1])[0]) + 1
            raise ValidationError(f"{channel}: timestamps not strictly increasing at sample {bad}")
        if not np.all(np.isfinite(vs)):
            bad = int(np.flatnonzero(~np.isfinite(vs))[0])
            raise ValidationError(f"{channel}: non-finite value at sample {bad}")
        ts.flags.writeable = False
        vs.flags.writeable = False
        self.channel = channel
        self.timestamps = ts
        self.values = vs

    def __len__(self) -> int:
        return len(self.timestamps)

    def __repr__(self) -> str:
        return f"ChannelSeries({self.channel!r}, n={len(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChannelSeries):
            return NotImplemented
        return (self.channel == other.channel
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.values, other.values))

    def mask_in(self, intervals: IntervalSet) -> np.ndarray:
        """Boolean mask of samples lying inside any of ``intervals``."""
        if not len(intervals) or not len(self.timestamps):
            return np.zeros(len(self.timestamps), dtype=bool)
        i = np.searchsorted(intervals.starts, self.timestamps, side="right") - 1
        ok = i >= 0
        out = np.zeros(len(self.timestamps), dtype=bool)
        out[ok] = self.timestamps[ok] <= intervals.ends[i[ok]]
        return out

    def slice_time(self, window: TimeInterval) -> "ChannelSeries":
        lo = np.searchsorted(self.timestamps, window.start, side="left")
        hi = np.searchsorted(self.timestamps, window.end, side="right")
        return ChannelSeries(self.channel, self.timestamps[lo:hi], self.values[lo:hi])

    @property
    def time_span(self) -> Optional[TimeInterval]:
        if not len(self.timestamps):
            return None
        return TimeInterval(int(self.timestamps[0]), int(self.timestamps[-1]))


GLOBAL_CHANNEL = "__global__"


@dataclass(frozen=True)
class DetectionSet:
    """Binary detections as interval sets, per channel and/or channel-agnostic.

    ``global_only`` holds intervals reported without channel attribution (the
    reserved ``__global__`` channel on disk).
    """

    per_channel: Mapping[str, IntervalSet]
    timeline: TimeInterval
    global_only: IntervalSet = field(default_factory=IntervalSet)

    def __post_init__(self):
        object.__setattr__(self, "per_channel", MappingProxyType(dict(self.per_channel)))
        for name, s in list(self.per_channel.items()) + [(GLOBAL_CHANNEL, self.global_only)]:
            if len(s) and (s.starts[0] < self.timeline.start or s.ends[-1] > self.timeline.end):
                raise ValidationError(f"detections on {name} fall outside the timeline")

    @property
    def has_channels(self) -> bool:
        return len(self.per_channel) > 0

    def global_view(self, channels: Optional[Iterable[str]] = None) -> IntervalSet:
        """Detections OR-ed across ``channels`` (all if None) plus channel-agnostic ones."""
        if channels is None:
            parts = list(self.per_channel.values())
        else:
            keep = set(channels)
            parts = [s for c, s in self.per_channel.items() if c in keep]
        return union_all(parts + [self.global_only])


@dataclass(frozen=True, slots=True)
class PRF:
    precision: float
    recall: float
    fbeta: float


@dataclass(frozen=True, slots=True)
class TimingScore:
    score: float
    after_ratio: float


@dataclass(frozen=True)
class MetricReport:
    event_f: PRF
    subsystem_f: Optional[PRF]
    channel_f: Optional[PRF]
    alarming_precision: float
    adtqc: TimingScore
    affiliation: Optional[PRF]
    beta: float
    excluded_categories: Sequence[str] = ()
    algorithm: str = ""

    def __post_init__(self):
        for name, v in self.scores().items():
            if v is not None and not (0.0 <= v <= 1.0 and not math.isnan(v)):
                raise ValidationError(f"score {name}={v} outside [0, 1]")

    def scores(self) -> dict[str, Optional[float]]:
        out: dict[str, Optional[float]] = {}
        for name in ("event_f", "subsystem_f", "channel_f", "affiliation"):
            prf = getattr(self, name)
            for k in ("precision", "recall", "fbeta"):
                out[f"{name}.{k}"] = None if prf is None else getattr(prf, k)
        out["alarming_precision"] = self.alarming_precision
        out["adtqc.score"] = self.adtqc.score
        out["adtqc.after_ratio"] = self.adtqc.after_ratio
        return out
