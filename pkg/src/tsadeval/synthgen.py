"""Deterministic synthetic missions with injected, fully annotated events.

Each channel is a sinusoid plus a linear trend plus Gaussian noise, sampled
with jittered spacing around a base rate. Events are placed in disjoint
slots and shaped so that taxonomy inference recovers exactly the requested
attributes:

* Global events jump outside the channel's nominal range, Local ones hold a
  value inside it.
* Point events cover one or two consecutive samples, subsequences at least
  ``MIN_SUBSEQ_SAMPLES``.
* Multivariate events touch two or more channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset_io import MissionDataset
from .datamodel import (
    NS_PER_DAY,
    NS_PER_S,
    AnomalyTypeAttributes,
    ChannelMeta,
    ChannelSeries,
    Dimensionality,
    EventAnnotation,
    EventCategory,
    IntervalSet,
    Length,
    Locality,
    ValidationError,
)

MIN_SUBSEQ_SAMPLES = 10
DEFAULT_START = 946_684_800 * NS_PER_S  # 2000-01-01T00:00:00Z

ALL_TYPES = tuple(
    AnomalyTypeAttributes(d, loc, ln)
    for d in Dimensionality for loc in Locality for ln in Length
)


@dataclass(frozen=True)
class EventSpec:
    category: EventCategory = EventCategory.ANOMALY
    class_: str = "class_1"
    attributes: Optional[AnomalyTypeAttributes] = None
    count: int = 1
    n_channels: Optional[int] = None  # multivariate width; random in [2, 3] if None
    length_samples: Optional[int] = None  # subsequence length; random or density-driven if None


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_channels: int = 4
    n_subsystems: int = 2
    duration: int = 2 * NS_PER_DAY
    base_rate_hz: float = 1 / 30
    rate_jitter: float = 0.1
    events: Sequence[EventSpec] = field(default_factory=lambda: tuple(EventSpec(attributes=t) for t in ALL_TYPES))
    anomaly_density: Optional[float] = None  # annotated share of the timeline for subsequence events
    n_telecommands: int = 2
    start: int = DEFAULT_START

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValidationError("n_channels must be >= 1")
        if not 1 <= self.n_subsystems <= self.n_channels:
            raise ValidationError("n_subsystems must be in [1, n_channels]")
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        if not self.base_rate_hz > 0:
            raise ValidationError("base_rate_hz must be positive")
        if not 0 <= self.rate_jitter < 1:
            raise ValidationError("rate_jitter must be in [0, 1)")
        if self.anomaly_density is not None and not 0 < self.anomaly_density < 1:
            raise ValidationError("anomaly_density must be in (0, 1)")

    @property
    def period(self) -> int:
        return round(NS_PER_S / self.base_rate_hz)

    @property
    def n_samples(self) -> int:
        return self.duration // self.period + 1


def _timestamps(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """Base grid plus per-sample offsets on a coarse tick so the modal spacing stays the base period."""
    p, n = cfg.period, cfg.n_samples
    tick = max(1, p // 10)
    max_ticks = max(0, (p // 2 - 1) // tick)
    half = cfg.rate_jitter * p / 2
    offs = np.rint(rng.uniform(-half, half, n) / tick).astype(np.int64)
    np.clip(offs, -max_ticks, max_ticks, out=offs)
    ts = cfg.start + np.arange(n, dtype=np.int64) * p + offs * tick
    # keep the mission inside [start, start + duration]
    ts[0] = cfg.start
    ts[-1] = min(ts[-1], cfg.start + cfg.duration)
    ts[-1] = max(ts[-1], ts[-2] + 1) if n > 1 else ts[-1]
    return ts


def _nominal(rng: np.random.Generator, n: int) -> np.ndarray:
    amp = rng.uniform(0.5, 2.0)
    cycles = rng.uniform(5, 50)
    phase = rng.uniform(0, 2 * np.pi)
    x = np.linspace(0.0, 1.0, n)
    return (rng.normal(0, 5) + amp * np.sin(2 * np.pi * cycles * x + phase)
            + rng.uniform(-0.5, 0.5) * amp * x + rng.normal(0, 0.1 * amp, n))


@dataclass
class _Placed:
    spec: EventSpec
    first: int  # sample index on the base grid
    n: int  # samples covered
    channels: list[str]


def _event_length(rng, spec: EventSpec, density_len: Optional[int]) -> int:
    a = spec.attributes
    if a is not None and a.length is Length.POINT:
        return int(rng.integers(1, 3))
    if spec.length_samples is not None:
        if a is not None and spec.length_samples < MIN_SUBSEQ_SAMPLES:
            raise ValidationError(f"subsequence events need >= {MIN_SUBSEQ_SAMPLES} samples")
        return spec.length_samples
    if density_len is not None:
        return density_len
    return int(rng.integers(MIN_SUBSEQ_SAMPLES, 5 * MIN_SUBSEQ_SAMPLES))


def _event_channels(rng, spec: EventSpec, names: list[str]) -> list[str]:
    a = spec.attributes
    if a is not None and a.dimensionality is Dimensionality.UNIVARIATE:
        k = 1
    elif a is not None:
        if len(names) < 2:
            raise ValidationError("multivariate events need at least two channels")
        k = spec.n_channels or int(rng.integers(2, min(3, len(names)) + 1))
        if not 2 <= k <= len(names):
            raise ValidationError(f"multivariate width {k} not in [2, {len(names)}]")
    else:
        k = spec.n_channels or 1
    return sorted(rng.choice(names, size=k, replace=False).tolist())


def _place(rng, cfg: SynthConfig, names: list[str]) -> list[_Placed]:
    specs = [s for s in cfg.events for _ in range(s.count)]
    if not specs:
        return []
    n = cfg.n_samples
    density_len = None
    n_sub = sum(1 for s in specs if s.attributes is None or s.attributes.length is Length.SUBSEQUENCE)
    if cfg.anomaly_density is not None and n_sub:
        density_len = max(MIN_SUBSEQ_SAMPLES, round(cfg.anomaly_density * (n - 1) / n_sub) + 1)
    lengths = [_event_length(rng, s, density_len) for s in specs]
    margin = 3  # free samples kept around every event
    if max(lengths) + 2 * margin > n:
        raise ValidationError("requested event is longer than the mission")
    order = rng.permutation(len(specs))
    free = n - sum(lengths) - 2 * margin * len(specs)
    if free < 0:
        raise ValidationError("events do not fit into the mission")
    # random gaps that add up to the free room keep the slots disjoint
    cuts = np.sort(rng.integers(0, free + 1, len(specs)))
    placed, cursor, prev_cut = [], 0, 0
    for k, i in enumerate(order):
        cursor += int(cuts[k] - prev_cut) + margin
        prev_cut = int(cuts[k])
        placed.append(_Placed(specs[i], cursor, lengths[i], _event_channels(rng, specs[i], names)))
        cursor += lengths[i] + margin
    return placed


def generate_mission(cfg: SynthConfig) -> MissionDataset:
    root = np.random.SeedSequence(cfg.seed)
    layout_ss, tc_ss, *ch_ss = root.spawn(2 + cfg.n_channels)
    layout = np.random.Generator(np.random.PCG64(layout_ss))
    names = [f"channel_{i + 1}" for i in range(cfg.n_channels)]
    meta = [ChannelMeta(nm, f"subsystem_{i % cfg.n_subsystems + 1}", i % cfg.n_subsystems + 1, "", True)
            for i, nm in enumerate(names)]

    ts, vals = {}, {}
    for nm, ss in zip(names, ch_ss):
        rng = np.random.Generator(np.random.PCG64(ss))
        ts[nm] = _timestamps(rng, cfg)
        vals[nm] = _nominal(rng, cfg.n_samples)

    placed = _place(layout, cfg, names)
    touched = {nm: np.zeros(cfg.n_samples, dtype=bool) for nm in names}
    for p in placed:
        for nm in p.channels:
            touched[nm][p.first:p.first + p.n] = True
    envelope = {}
    for nm in names:
        rest = vals[nm][~touched[nm]]
        envelope[nm] = (float(rest.min()), float(rest.max()))

    events = []
    for k, p in enumerate(sorted(placed, key=lambda q: q.first)):
        eid = f"id_{k + 1}"
        segs = {}
        for nm in p.channels:
            sl = slice(p.first, p.first + p.n)
            lo, hi = envelope[nm]
            a = p.spec.attributes
            if p.spec.category is EventCategory.COMMUNICATION_GAP:
                pass  # samples are dropped below
            elif a is not None and a.locality is Locality.GLOBAL:
                jump = (hi - lo) * layout.uniform(0.5, 1.5) + 1e-6
                vals[nm][sl] = hi + jump if layout.random() < 0.5 else lo - jump
            else:
                vals[nm][sl] = lo + (hi - lo) * layout.uniform(0.3, 0.7)
            segs[nm] = IntervalSet([(int(ts[nm][p.first]), int(ts[nm][p.first + p.n - 1]))])
        events.append(EventAnnotation(eid, p.spec.category, p.spec.class_, "", segs, p.spec.attributes))

    gaps = [ev for ev, p in zip(events, sorted(placed, key=lambda q: q.first))
            if p.spec.category is EventCategory.COMMUNICATION_GAP]
    channels = {}
    for nm in names:
        keep = np.ones(cfg.n_samples, dtype=bool)
        for ev in gaps:
            if nm in ev.segments:
                s = ev.segments[nm]
                keep &= ~((ts[nm] >= s.starts[0]) & (ts[nm] <= s.ends[0]))
        channels[nm] = ChannelSeries(nm, ts[nm][keep], vals[nm][keep])

    tc_rng = np.random.Generator(np.random.PCG64(tc_ss))
    tcs, prio = {}, {}
    for i in range(cfg.n_telecommands):
        name = f"telecommand_{i + 1}"
        k = int(tc_rng.integers(1, 20))
        tcs[name] = np.sort(cfg.start + tc_rng.integers(0, cfg.duration + 1, k)).astype(np.int64)
        tcs[name] = np.unique(tcs[name])
        prio[name] = int(tc_rng.integers(0, 4))
    return MissionDataset(channels, tcs, meta, events, prio)
