"""Uniform-grid resampling, channel standardisation and telecommand encoding.

Resampling is a zero-order hold: every grid point takes the value and label
of the last original sample at or before it, with leading grid points
back-filled from the first sample. A correction pass then guarantees that
annotated samples falling strictly between two grid points are not lost.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from . import _pykernels, kernels
from .datamodel import (
    NS_PER_S,
    ChannelKind,
    ChannelSeries,
    IntervalSet,
    TimeInterval,
    ValidationError,
    union_all,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResampleSpec:
    target_hz: float

    def __post_init__(self):
        if not self.target_hz > 0:
            raise ValidationError("target_hz must be positive")
        if self.resolution <= 0:
            raise ValidationError(f"target_hz={self.target_hz} gives a zero resolution")

    @property
    def resolution(self) -> int:
        """Grid spacing in nanoseconds."""
        return round(NS_PER_S / self.target_hz)

    @classmethod
    def from_resolution(cls, ns: int) -> "ResampleSpec":
        return cls(NS_PER_S / ns)


def build_uniform_timeline(all_channel_timestamps: Iterable[np.ndarray], spec: ResampleSpec) -> np.ndarray:
    """Epoch-anchored grid from floor(earliest) to ceil(latest) sample, one resolution apart."""
    res = spec.resolution
    firsts, lasts = [], []
    for ts in all_channel_timestamps:
        if len(ts):
            firsts.append(int(ts[0]))
            lasts.append(int(ts[-1]))
    if not firsts:
        raise ValidationError("cannot build a timeline without samples")
    first = (min(firsts) // res) * res
    last = -((-max(lasts)) // res) * res
    return np.arange(first, last + res, res, dtype=np.int64)


@dataclass(frozen=True)
class ResampledChannel:
    values: np.ndarray
    labels: np.ndarray
    source_index: np.ndarray  # original sample feeding each grid point


def _gather(series: ChannelSeries, labels: np.ndarray, idx: np.ndarray) -> ResampledChannel:
    if len(series) == 0:
        raise ValidationError(f"{series.channel}: cannot resample an empty series")
    return ResampledChannel(series.values[idx], labels[idx], idx)


def _labels_for(series: ChannelSeries, labels) -> np.ndarray:
    if labels is None:
        return np.zeros(len(series), dtype=bool)
    labels = np.asarray(labels)
    if labels.shape != series.timestamps.shape:
        raise ValidationError(f"{series.channel}: labels not aligned with samples")
    return labels


def zoh_resample(series: ChannelSeries, labels, timeline: np.ndarray) -> ResampledChannel:
    """Plain zero-order hold (no anomaly correction). Labels may be booleans or event codes."""
    labels = _labels_for(series, labels)
    return _gather(series, labels, _pykernels.zoh_index(series.timestamps, np.asarray(timeline, dtype=np.int64)))


def anomaly_preservation_correction(resampled: ResampledChannel, series: ChannelSeries, labels,
                                    timeline: np.ndarray) -> ResampledChannel:
    """Give the latter grid point of each window the last annotated original inside it.

    A window is the open span between two consecutive grid points. The
    correction fires when the latter grid point is unannotated after the
    plain hold; whether the former one is annotated does not matter.
    """
    labels = _labels_for(series, labels)
    idx = _pykernels.correct_missing(series.timestamps, (labels != 0).astype(np.uint8),
                                     np.asarray(timeline, dtype=np.int64), resampled.source_index)
    return _gather(series, labels, idx)


def resample_channel(series: ChannelSeries, labels, timeline: np.ndarray) -> ResampledChannel:
    """Hold plus correction in one pass (uses the compiled kernel when available)."""
    labels = _labels_for(series, labels)
    idx = kernels.zoh_resample_index(series.timestamps, labels != 0, timeline)
    return _gather(series, labels, idx)


# --- channel kinds and standardisation ---------------------------------------

def classify_channel(values: np.ndarray, declared: ChannelKind = ChannelKind.AUTO) -> ChannelKind:
    """Resolve a channel kind. Declared kinds win; Categorical is never auto-detected."""
    if declared is not ChannelKind.AUTO:
        return declared
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        raise ValidationError("cannot classify an empty series")
    n_unique = len(np.unique(values))
    if n_unique == 1:
        return ChannelKind.CONSTANT
    if n_unique == 2:
        return ChannelKind.BINARY
    d = np.diff(values)
    if np.all(d >= 0) or np.all(d <= 0):
        return ChannelKind.MONOTONIC
    return ChannelKind.CONTINUOUS


@dataclass(frozen=True)
class StandardizerParams:
    channel: str
    kind: ChannelKind
    mean: float = 0.0
    std: float = 1.0
    min: float = 0.0
    max: float = 1.0
    category_map: Optional[Mapping[float, int]] = None

    def to_dict(self) -> dict:
        d = {"channel": self.channel, "kind": self.kind.value, "mean": self.mean, "std": self.std,
             "min": self.min, "max": self.max}
        if self.category_map is not None:
            d["category_map"] = [[k, v] for k, v in self.category_map.items()]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StandardizerParams":
        cmap = d.get("category_map")
        return cls(d["channel"], ChannelKind(d["kind"]), float(d["mean"]), float(d["std"]),
                   float(d["min"]), float(d["max"]),
                   None if cmap is None else {float(k): int(v) for k, v in cmap})


def _ordinals(values: np.ndarray, cmap: Mapping[float, int], channel: str) -> np.ndarray:
    fresh = max(cmap.values(), default=-1) + 1
    out = np.empty(len(values), dtype=np.float64)
    unseen = 0
    for i, v in enumerate(values.tolist()):
        o = cmap.get(v)
        if o is None:
            unseen += 1
            o = fresh
        out[i] = o
    if unseen:
        warnings.warn(f"{channel}: {unseen} samples with categories unseen in training", stacklevel=3)
    return out


def fit_standardizer(values, kind: ChannelKind, nominal=None, channel: str = "") -> StandardizerParams:
    """Fit standardisation parameters on the nominal training samples of one channel.

    Args:
        values: resampled training values of the channel.
        kind: resolved channel kind (not Auto).
        nominal: boolean mask of nominal samples; all samples if omitted.
        channel: name recorded in the parameters.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.ones(len(values), dtype=bool) if nominal is None else np.asarray(nominal, dtype=bool)
    if kind is ChannelKind.AUTO:
        raise ValidationError("resolve the channel kind before fitting")
    nom = values[mask]
    if len(nom) == 0:
        raise ValidationError(f"{channel}: no nominal training samples")

    if kind is ChannelKind.MONOTONIC:
        # differences only between two consecutive nominal samples
        d = np.diff(values)[mask[1:] & mask[:-1]]
        if len(d) == 0:
            raise ValidationError(f"{channel}: need two consecutive nominal samples")
        return StandardizerParams(channel, kind, float(d.mean()), float(d.std()))
    if kind is ChannelKind.BINARY:
        lo, hi = float(nom.min()), float(nom.max())
        if lo == hi:
            raise ValidationError(f"{channel}: binary channel with a single nominal value")
        return StandardizerParams(channel, kind, min=lo, max=hi)
    if kind is ChannelKind.CONSTANT:
        return StandardizerParams(channel, kind, float(nom.mean()), 0.0)
    if kind is ChannelKind.CATEGORICAL:
        _, first = np.unique(nom, return_index=True)
        order = nom[np.sort(first)]
        cmap = {float(v): i for i, v in enumerate(order.tolist())}
        ords = _ordinals(nom, cmap, channel)
        return StandardizerParams(channel, kind, float(ords.mean()), float(ords.std()), category_map=cmap)
    return StandardizerParams(channel, kind, float(nom.mean()), float(nom.std()))


def _scale(x: np.ndarray, mean: float, std: float) -> np.ndarray:
    # zero spread degrades to mean removal
    return x - mean if std == 0 else (x - mean) / std


def apply_standardizer(values, params: StandardizerParams) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    kind = params.kind
    if kind is ChannelKind.BINARY:
        return (x - params.min) / (params.max - params.min)
    if kind is ChannelKind.CONSTANT:
        return x - params.mean
    if kind is ChannelKind.MONOTONIC:
        out = np.zeros(len(x), dtype=np.float64)
        if len(x) > 1:
            out[1:] = _scale(np.diff(x), params.mean, params.std)
        return out
    if kind is ChannelKind.CATEGORICAL:
        return _scale(_ordinals(x, params.category_map or {}, params.channel), params.mean, params.std)
    return _scale(x, params.mean, params.std)


# --- telecommands -------------------------------------------------------------

def encode_telecommands(executions, timeline: np.ndarray) -> np.ndarray:
    """Binary impulses: grid point g is 1 iff an execution falls in (g - resolution, g].

    Executions outside the grid are assigned to the nearest end point, so none is dropped.
    """
    grid = np.asarray(timeline, dtype=np.int64)
    out = np.zeros(len(grid), dtype=np.uint8)
    ex = np.asarray(executions, dtype=np.int64)
    if len(ex) and len(grid):
        k = np.clip(np.searchsorted(grid, ex, side="left"), 0, len(grid) - 1)
        out[k] = 1
    return out


# --- whole-mission pipeline ---------------------------------------------------

def workers() -> int:
    try:
        return max(1, int(os.environ.get("TSADEVAL_WORKERS", "0")) or (os.cpu_count() or 1))
    except ValueError:
        return 1


@dataclass
class PreprocessedMission:
    timeline: np.ndarray
    values: dict[str, np.ndarray]
    labels: dict[str, np.ndarray]
    params: dict[str, StandardizerParams] = field(default_factory=dict)
    telecommands: dict[str, np.ndarray] = field(default_factory=dict)


def channel_labels(series: ChannelSeries, segments: Optional[IntervalSet]) -> np.ndarray:
    return series.mask_in(segments) if segments is not None else np.zeros(len(series), dtype=bool)


def preprocess_mission(channels: Mapping[str, ChannelSeries], segments: Mapping[str, IntervalSet],
                       spec: ResampleSpec, kinds: Mapping[str, ChannelKind],
                       train_window: Optional[TimeInterval] = None,
                       telecommands: Optional[Mapping[str, np.ndarray]] = None,
                       standardize: bool = True,
                       excluded_from_nominal: Optional[IntervalSet] = None) -> PreprocessedMission:
    """Resample every channel onto one shared grid and standardise on nominal training points.

    ``segments`` maps channel name to its annotated intervals (all events);
    ``excluded_from_nominal`` adds further time ranges never used for fitting.
    """
    timeline = build_uniform_timeline((s.timestamps for s in channels.values()), spec)
    names = list(channels)

    def one(name: str):
        s = channels[name]
        lab = channel_labels(s, segments.get(name))
        r = resample_channel(s, lab, timeline)
        if not standardize:
            return name, r.values, r.labels, None
        train = np.ones(len(timeline), dtype=bool)
        if train_window is not None:
            train = (timeline >= train_window.start) & (timeline <= train_window.end)
        nominal = train & ~r.labels.astype(bool)
        if excluded_from_nominal is not None and len(excluded_from_nominal):
            nominal &= ~ChannelSeries("", timeline, np.zeros(len(timeline))).mask_in(excluded_from_nominal)
        kind = classify_channel(r.values[train], kinds.get(name, ChannelKind.AUTO))
        try:
            params = fit_standardizer(r.values, kind, nominal, name)
        except ValidationError as exc:
            log.warning("%s: %s; falling back to mean removal", name, exc)
            params = StandardizerParams(name, ChannelKind.CONSTANT, float(np.mean(r.values[train])), 0.0)
        return name, apply_standardizer(r.values, params), r.labels, params

    with ThreadPoolExecutor(max_workers=workers()) as pool:
        results = list(pool.map(one, names))
    out = PreprocessedMission(timeline, {}, {})
    for name, v, lab, params in results:
        out.values[name] = v
        out.labels[name] = lab
        if params is not None:
            out.params[name] = params
    for name, ex in (telecommands or {}).items():
        out.telecommands[name] = encode_telecommands(ex, timeline)
    return out


def annotated_segments(events, channels: Optional[Iterable[str]] = None) -> dict[str, IntervalSet]:
    """Per-channel union of all event segments (every category)."""
    per: dict[str, list[IntervalSet]] = {}
    keep = None if channels is None else set(channels)
    for ev in events:
        for ch, s in ev.segments.items():
            if keep is None or ch in keep:
                per.setdefault(ch, []).append(s)
    return {ch: union_all(v) for ch, v in per.items()}
