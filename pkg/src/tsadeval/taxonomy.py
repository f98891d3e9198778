"""Infer dimensionality, locality and length of annotated events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .datamodel import (
    NS_PER_S,
    AnomalyTypeAttributes,
    ChannelSeries,
    Dimensionality,
    EventAnnotation,
    IntervalSet,
    Length,
    Locality,
    ValidationError,
    union_all,
)

POINT_MAX_SAMPLES = 3


@dataclass(frozen=True)
class DominantFrequency:
    period_ns: int

    def __post_init__(self):
        if self.period_ns <= 0:
            raise ValidationError("dominant period must be positive")

    @property
    def hz(self) -> float:
        return NS_PER_S / self.period_ns

    @classmethod
    def from_hz(cls, hz: float) -> "DominantFrequency":
        return cls(round(NS_PER_S / hz))


def dominant_frequency(series: Iterable[ChannelSeries]) -> DominantFrequency:
    """Mode of inter-sample spacings over all series; ties go to the shorter spacing."""
    deltas = [np.diff(s.timestamps) for s in series if len(s) >= 2]
    if not deltas:
        raise ValidationError("need at least one series with two samples")
    values, counts = np.unique(np.concatenate(deltas), return_counts=True)
    return DominantFrequency(int(values[np.argmax(counts)]))


def nominal_envelope(channels: Mapping[str, ChannelSeries], events: Iterable[EventAnnotation]) -> dict[str, tuple[float, float]]:
    """Per-channel (min, max) over samples not covered by any event segment on that channel."""
    per: dict[str, list[IntervalSet]] = {}
    for ev in events:
        for ch, s in ev.segments.items():
            per.setdefault(ch, []).append(s)
    env = {}
    for name, s in channels.items():
        nominal = ~s.mask_in(union_all(per.get(name, [])))
        if nominal.any():
            v = s.values[nominal]
            env[name] = (float(v.min()), float(v.max()))
    return env


def infer_dimensionality(event: EventAnnotation, channels: Optional[Iterable[str]] = None) -> Optional[Dimensionality]:
    """Univariate for one affected channel, Multivariate for more; None if none in the subset."""
    affected = event.channels if channels is None else [c for c in event.channels if c in set(channels)]
    if not affected:
        return None
    return Dimensionality.UNIVARIATE if len(affected) == 1 else Dimensionality.MULTIVARIATE


def infer_locality(event: EventAnnotation, channels: Mapping[str, ChannelSeries],
                   envelope: Mapping[str, tuple[float, float]]) -> Locality:
    """Global iff some annotated sample lies strictly outside its channel's nominal range."""
    for ch, segs in event.segments.items():
        if ch not in channels or not len(segs):
            continue
        if ch not in envelope:
            raise ValidationError(f"channel {ch} has no nominal envelope")
        lo, hi = envelope[ch]
        s = channels[ch]
        v = s.values[s.mask_in(segs)]
        if len(v) and (v.min() < lo or v.max() > hi):
            return Locality.GLOBAL
    return Locality.LOCAL


def region_samples(duration_ns: int, period_ns: int) -> int:
    """Grid points covered by a closed region of the given duration."""
    return duration_ns // period_ns + 1


def infer_length(event: EventAnnotation, freq: DominantFrequency, channels: Optional[Iterable[str]] = None) -> Length:
    """Point iff every annotated region spans at most three samples at the dominant rate."""
    span = event.span(channels)
    durations = (span.ends - span.starts).tolist()
    if all(region_samples(d, freq.period_ns) <= POINT_MAX_SAMPLES for d in durations):
        return Length.POINT
    return Length.SUBSEQUENCE


def infer_all(events: Iterable[EventAnnotation], channels: Mapping[str, ChannelSeries],
              channel_subset: Optional[Iterable[str]] = None,
              freq: Optional[DominantFrequency] = None) -> dict[str, AnomalyTypeAttributes]:
    """Attributes for every anomaly and rare nominal event touching the channel subset.

    Communication gaps and invalid segments are skipped. The envelope and the
    dominant frequency are computed from the subset only, unless ``freq`` is given.
    """
    events = list(events)
    subset = list(channels) if channel_subset is None else [c for c in channel_subset if c in channels]
    sub_channels = {c: channels[c] for c in subset}
    envelope = nominal_envelope(sub_channels, events)
    if freq is None:
        freq = dominant_frequency(sub_channels.values())
    out = {}
    for ev in events:
        if not ev.category.has_attributes:
            continue
        dim = infer_dimensionality(ev, subset)
        if dim is None:
            continue
        restricted = ev.restricted(subset)
        out[ev.id] = AnomalyTypeAttributes(dim, infer_locality(restricted, sub_channels, envelope),
                                           infer_length(restricted, freq))
    return out
