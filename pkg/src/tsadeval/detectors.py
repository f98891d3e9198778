"""Baseline detectors: GlobalSTD and fixed nominal limits.

Both are fitted per channel on nominal training samples (outside every
annotated event, rare nominal events included) and flag each sample on its
own value only, so they can run in a streaming setting.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import kernels
from .datamodel import ChannelSeries, DetectionSet, IntervalSet, TimeInterval, ValidationError
from .preprocess import workers


@dataclass(frozen=True)
class GlobalStdModel:
    params: Mapping[str, tuple[float, float]]  # channel -> (mean, std)
    n_sigmas: float = 3.0

    kind = "globalstd"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_sigmas": self.n_sigmas,
                "channels": {c: {"mean": m, "std": s} for c, (m, s) in self.params.items()}}


@dataclass(frozen=True)
class LimitModel:
    params: Mapping[str, tuple[float, float]]  # channel -> (min, max)

    kind = "limits"

    def __post_init__(self):
        for c, (lo, hi) in self.params.items():
            if lo > hi:
                raise ValidationError(f"{c}: min > max")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "channels": {c: {"min": lo, "max": hi} for c, (lo, hi) in self.params.items()}}


def _nominal_values(series: ChannelSeries, annotated: Optional[IntervalSet]) -> np.ndarray:
    v = series.values if annotated is None else series.values[~series.mask_in(annotated)]
    if len(v) == 0:
        raise ValidationError(f"{series.channel}: no nominal training samples")
    return v


def _per_channel(fn, channels: Mapping[str, ChannelSeries]):
    names = list(channels)
    with ThreadPoolExecutor(max_workers=workers()) as pool:
        return dict(zip(names, pool.map(lambda n: fn(channels[n]), names)))


def fit_globalstd(channels: Mapping[str, ChannelSeries], annotated: Mapping[str, IntervalSet],
                  n_sigmas: float = 3.0) -> GlobalStdModel:
    """Population mean and std per channel over nominal samples.

    ``annotated`` maps channel name to the union of all event segments on it.
    """
    if not n_sigmas > 0:
        raise ValidationError("n_sigmas must be positive")

    def fit(s: ChannelSeries):
        v = _nominal_values(s, annotated.get(s.channel))
        return float(v.mean()), float(v.std())
    return GlobalStdModel(_per_channel(fit, channels), float(n_sigmas))


def fit_limits(channels: Mapping[str, ChannelSeries], annotated: Mapping[str, IntervalSet]) -> LimitModel:
    def fit(s: ChannelSeries):
        v = _nominal_values(s, annotated.get(s.channel))
        return float(v.min()), float(v.max())
    return LimitModel(_per_channel(fit, channels))


def globalstd_flags(values: np.ndarray, mean: float, std: float, n_sigmas: float) -> np.ndarray:
    """Strict test |x - mean| > n * std; a zero std flags any x != mean."""
    return np.abs(np.asarray(values, dtype=np.float64) - mean) > n_sigmas * std


def limit_flags(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return (v < lo) | (v > hi)


def flags_to_intervals(timestamps: np.ndarray, flags: np.ndarray) -> IntervalSet:
    """Consecutive flagged samples become one closed interval from first to last timestamp."""
    s, e = kernels.mask_runs(flags)
    return IntervalSet.from_arrays(timestamps[s], timestamps[e], merged=True)


def _timeline(channels: Mapping[str, ChannelSeries], timeline: Optional[TimeInterval]) -> TimeInterval:
    if timeline is not None:
        return timeline
    spans = [s.time_span for s in channels.values() if len(s)]
    if not spans:
        raise ValidationError("no samples to detect on")
    return TimeInterval(min(t.start for t in spans), max(t.end for t in spans))


def _detect(channels: Mapping[str, ChannelSeries], params: Mapping, flag_fn,
            timeline: Optional[TimeInterval]) -> DetectionSet:
    unknown = set(channels) - set(params)
    if unknown:
        raise ValidationError(f"model has no parameters for channel(s): {', '.join(sorted(unknown))}")

    tl = _timeline(channels, timeline)

    def run(s: ChannelSeries) -> IntervalSet:
        return flags_to_intervals(s.timestamps, flag_fn(s.values, *params[s.channel])).clip(tl)
    return DetectionSet(_per_channel(run, channels), tl)


def detect_globalstd(channels: Mapping[str, ChannelSeries], model: GlobalStdModel,
                     timeline: Optional[TimeInterval] = None) -> DetectionSet:
    return _detect(channels, model.params, lambda v, m, s: globalstd_flags(v, m, s, model.n_sigmas), timeline)


def detect_limits(channels: Mapping[str, ChannelSeries], model: LimitModel,
                  timeline: Optional[TimeInterval] = None) -> DetectionSet:
    return _detect(channels, model.params, limit_flags, timeline)


def detect(channels: Mapping[str, ChannelSeries], model, timeline: Optional[TimeInterval] = None) -> DetectionSet:
    if isinstance(model, GlobalStdModel):
        return detect_globalstd(channels, model, timeline)
    return detect_limits(channels, model, timeline)


def model_from_dict(d: Mapping):
    ch = d.get("channels", {})
    if d.get("kind") == GlobalStdModel.kind:
        return GlobalStdModel({c: (float(p["mean"]), float(p["std"])) for c, p in ch.items()}, float(d["n_sigmas"]))
    if d.get("kind") == LimitModel.kind:
        return LimitModel({c: (float(p["min"]), float(p["max"])) for c, p in ch.items()})
    raise ValidationError(f"unknown model kind {d.get('kind')!r}")


def save_model(path, model) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
