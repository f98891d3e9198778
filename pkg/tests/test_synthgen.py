import filecmp

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsadeval.dataset_io import save_dataset
from tsadeval.datamodel import (
    NS_PER_DAY,
    AnomalyTypeAttributes,
    Dimensionality,
    EventCategory,
    Length,
    Locality,
    ValidationError,
    union_all,
)
from tsadeval.synthgen import ALL_TYPES, EventSpec, SynthConfig, generate_mission
from tsadeval.taxonomy import infer_all

GUP = AnomalyTypeAttributes(Dimensionality.UNIVARIATE, Locality.GLOBAL, Length.POINT)
SUBSEQ = [a for a in ALL_TYPES if a.length is Length.SUBSEQUENCE]


def test_single_point_event():
    cfg = SynthConfig(seed=1, n_channels=2, n_subsystems=1, events=(EventSpec(attributes=GUP),))
    ds = generate_mission(cfg)
    (ev,) = ds.events
    assert len(ev.channels) == 1
    seg = ev.segments[ev.channels[0]]
    assert len(seg) == 1 and seg.total_duration <= 3 * cfg.period


def test_byte_identical_reruns(tmp_path):
    cfg = SynthConfig(seed=11, n_channels=3)
    save_dataset(generate_mission(cfg), tmp_path / "a")
    save_dataset(generate_mission(cfg), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    files = [p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file()]
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    assert not cmp.left_only and not cmp.right_only


def test_seed_changes_output():
    a = generate_mission(SynthConfig(seed=1, n_channels=2))
    b = generate_mission(SynthConfig(seed=2, n_channels=2))
    assert not np.array_equal(a.channels["channel_1"].values, b.channels["channel_1"].values)


def test_local_multivariate_subsequence_on_three_channels():
    attrs = AnomalyTypeAttributes(Dimensionality.MULTIVARIATE, Locality.LOCAL, Length.SUBSEQUENCE)
    ds = generate_mission(SynthConfig(seed=3, events=(EventSpec(attributes=attrs, n_channels=3),)))
    (ev,) = ds.events
    assert len(ev.channels) == 3
    assert infer_all(ds.events, ds.channels)[ev.id] == attrs


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_structural_guarantees(seed, n_channels):
    cfg = SynthConfig(seed=seed, n_channels=n_channels, n_subsystems=min(2, n_channels))
    ds = generate_mission(cfg)
    for ch, s in ds.channels.items():
        assert np.all(np.diff(s.timestamps) > 0)
        assert s.timestamps[0] >= cfg.start and s.timestamps[-1] <= cfg.start + cfg.duration
    inferred = infer_all(ds.events, ds.channels)
    for ev in ds.events:
        if ev.attributes.dimensionality is Dimensionality.MULTIVARIATE:
            assert len(ev.channels) >= 2
        if ev.attributes.length is Length.POINT:
            assert all(iv.duration <= 3 * cfg.period for s in ev.segments.values() for iv in s)
        assert inferred[ev.id] == ev.attributes


@pytest.mark.parametrize("density", [0.02, 0.05, 0.15])
def test_anomaly_density(density):
    cfg = SynthConfig(seed=5, duration=60 * NS_PER_DAY, anomaly_density=density,
                      events=tuple(EventSpec(attributes=a, count=3) for a in SUBSEQ))
    ds = generate_mission(cfg)
    spans = union_all(ev.span() for ev in ds.events)
    assert spans.total_duration / cfg.duration == pytest.approx(density, rel=0.1)


def test_communication_gap_drops_samples():
    gap = EventSpec(EventCategory.COMMUNICATION_GAP, "gap", None, n_channels=1, length_samples=20)
    ds = generate_mission(SynthConfig(seed=8, events=(gap,)))
    (ev,) = ds.events
    ch = ev.channels[0]
    seg = ev.segments[ch]
    assert not ds.channels[ch].mask_in(seg).any()


def test_invalid_configs():
    with pytest.raises(ValidationError):
        generate_mission(SynthConfig(duration=NS_PER_DAY // 24,
                                     events=(EventSpec(attributes=SUBSEQ[0], length_samples=500),)))
    with pytest.raises(ValidationError):
        SynthConfig(n_channels=0)
    with pytest.raises(ValidationError):
        SynthConfig(base_rate_hz=0)
    with pytest.raises(ValidationError):
        generate_mission(SynthConfig(n_channels=1, n_subsystems=1))  # multivariate types need two channels
