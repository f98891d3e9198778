import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import S
from tsadeval.dataset_io import parse_timestamp
from tsadeval.datamodel import NS_PER_S, ChannelKind, ChannelSeries, TimeInterval, ValidationError
from tsadeval.preprocess import (
    ResampleSpec,
    anomaly_preservation_correction,
    apply_standardizer,
    build_uniform_timeline,
    classify_channel,
    encode_telecommands,
    fit_standardizer,
    preprocess_mission,
    resample_channel,
    zoh_resample,
)


def t(hms):
    return parse_timestamp(f"2000-01-01T{hms}Z")


TEN_S = ResampleSpec(0.1)


def test_resolution():
    assert TEN_S.resolution == 10 * NS_PER_S
    assert ResampleSpec(0.033).resolution == round(1e9 / 0.033)
    with pytest.raises(ValidationError):
        ResampleSpec(0)


def test_timeline_rounding():
    grid = build_uniform_timeline([np.array([t("08:10:12"), t("08:10:14"), t("08:10:38")])], TEN_S)
    assert grid.tolist() == [t("08:10:10"), t("08:10:20"), t("08:10:30"), t("08:10:40")]
    assert build_uniform_timeline([np.array([t("08:10:10")])], TEN_S).tolist() == [t("08:10:10")]
    two = build_uniform_timeline([np.array([t("08:10:12")]), np.array([t("08:10:41")])], TEN_S)
    assert two[0] == t("08:10:10") and two[-1] == t("08:10:50") and len(two) == 5
    with pytest.raises(ValidationError):
        build_uniform_timeline([np.array([], dtype=np.int64)], TEN_S)


def test_zoh_hold_and_backfill():
    s = ChannelSeries("a", [t("08:10:12"), t("08:10:14"), t("08:10:38")], [1.0, 2.0, 3.0])
    grid = build_uniform_timeline([s.timestamps], TEN_S)
    r = zoh_resample(s, None, grid)
    # 8:10:10 back-fills from the first sample; 8:10:20 and 8:10:30 hold 8:10:14; 8:10:40 holds 8:10:38
    assert r.values.tolist() == [1.0, 2.0, 2.0, 3.0]


def test_zoh_identity_on_grid():
    grid = np.arange(0, 100, 10, dtype=np.int64)
    s = ChannelSeries("a", grid, np.arange(10.0))
    assert np.array_equal(resample_channel(s, None, grid).values, s.values)


def test_correction_single_spike():
    ts = [0, 10, 13, 20, 30]
    lab = [False, False, True, False, False]
    s = ChannelSeries("a", ts, [0.0, 0.0, 9.0, 0.0, 0.0])
    grid = np.array([0, 10, 20, 30], dtype=np.int64)
    plain = zoh_resample(s, lab, grid)
    assert not plain.labels.any()
    fixed = anomaly_preservation_correction(plain, s, lab, grid)
    assert fixed.values.tolist() == [0.0, 0.0, 9.0, 0.0]
    assert fixed.labels.tolist() == [False, False, True, False]
    assert np.array_equal(resample_channel(s, lab, grid).source_index, fixed.source_index)


def test_correction_takes_last_annotated():
    s = ChannelSeries("a", [0, 11, 12, 20], [0.0, 5.0, 7.0, 0.0])
    lab = [False, True, True, False]
    r = resample_channel(s, lab, np.array([0, 10, 20], dtype=np.int64))
    assert r.values.tolist() == [0.0, 0.0, 7.0]


def test_no_annotations_no_change():
    s = ChannelSeries("a", [0, 3, 7, 12, 25], [1.0, 2.0, 3.0, 4.0, 5.0])
    grid = np.arange(0, 30, 10, dtype=np.int64)
    assert np.array_equal(resample_channel(s, None, grid).values, zoh_resample(s, None, grid).values)


@st.composite
def labelled_series(draw):
    n = draw(st.integers(1, 80))
    gaps = draw(st.lists(st.integers(1, 40), min_size=n, max_size=n))
    ts = np.cumsum(gaps).astype(np.int64)
    events = np.zeros(n, dtype=np.int64)
    i = 0
    code = 0
    while i < n:
        if draw(st.booleans()) and draw(st.booleans()):
            code += 1
            k = draw(st.integers(1, 5))
            events[i:i + k] = code
            i += k
        i += draw(st.integers(1, 6))
    res = draw(st.integers(1, 60))
    return ts, events, res


@given(labelled_series())
def test_no_annotated_sample_lost(case):
    """Every window (g[k-1], g[k]] holding an annotated original ends up annotated at g[k]."""
    ts, events, res = case
    s = ChannelSeries("a", ts, np.arange(len(ts), dtype=float))
    grid = build_uniform_timeline([ts], ResampleSpec.from_resolution(res))
    r = resample_channel(s, events, grid)
    k = np.searchsorted(grid, ts[events > 0], side="left")
    assert r.labels[k].all()
    # labels always travel with the value of the sample that fed the grid point
    assert np.array_equal(r.labels, events[r.source_index])


def test_classify_channel():
    assert classify_channel(np.array([0, 0, 5, 5, 0.0])) is ChannelKind.BINARY
    assert classify_channel(np.full(4, 7.0)) is ChannelKind.CONSTANT
    assert classify_channel(np.array([0, 1, 2, 4, 4, 9.0])) is ChannelKind.MONOTONIC
    assert classify_channel(np.array([0, 3, 1, 4.0])) is ChannelKind.CONTINUOUS
    assert classify_channel(np.array([0, 3, 1, 4.0]), ChannelKind.CATEGORICAL) is ChannelKind.CATEGORICAL


def test_standardizers():
    p = fit_standardizer([1.0, 2.0, 3.0], ChannelKind.CONTINUOUS)
    assert p.mean == 2.0 and p.std == pytest.approx(np.sqrt(2 / 3))
    assert apply_standardizer([4.0], fit_standardizer([1.0, 3.0], ChannelKind.CONTINUOUS)).tolist() == [2.0]

    mono = fit_standardizer([0, 1, 2, 4, 6.0], ChannelKind.MONOTONIC)
    assert (mono.mean, mono.std) == (1.5, 0.5)
    assert apply_standardizer([0, 1, 2, 4, 6.0], mono).tolist() == [0.0, -1.0, -1.0, 1.0, 1.0]

    b = fit_standardizer([0.0, 5.0, 5.0], ChannelKind.BINARY)
    assert apply_standardizer([0.0, 5.0], b).tolist() == [0.0, 1.0]
    with pytest.raises(ValidationError):
        fit_standardizer([5.0, 5.0], ChannelKind.BINARY)

    c = fit_standardizer([7.0, 7.0], ChannelKind.CONSTANT)
    assert apply_standardizer([7.0, 7.0], c).tolist() == [0.0, 0.0]

    cat = fit_standardizer([2.0, 1.0, 2.0, 3.0], ChannelKind.CATEGORICAL)
    assert cat.category_map == {2.0: 0, 1.0: 1, 3.0: 2}
    with pytest.warns(UserWarning):
        out = apply_standardizer([9.0], cat)
    assert out[0] == pytest.approx((3 - cat.mean) / cat.std)

    with pytest.raises(ValidationError):
        fit_standardizer([1.0, 2.0], ChannelKind.CONTINUOUS, nominal=[False, False])


def test_standardizer_uses_nominal_only():
    p = fit_standardizer([1.0, 100.0, 3.0], ChannelKind.CONTINUOUS, nominal=[True, False, True])
    assert p.mean == 2.0


def test_params_roundtrip():
    cat = fit_standardizer([2.0, 1.0, 2.0], ChannelKind.CATEGORICAL, channel="x")
    assert type(cat).from_dict(cat.to_dict()) == cat


def test_telecommand_impulses():
    grid = np.array([t("08:10:10"), t("08:10:20"), t("08:10:30")], dtype=np.int64)
    assert encode_telecommands([t("08:10:13")], grid).tolist() == [0, 1, 0]
    assert encode_telecommands([t("08:10:13"), t("08:10:17")], grid).tolist() == [0, 1, 0]
    assert encode_telecommands([t("08:10:20")], grid).tolist() == [0, 1, 0]
    # executions past the grid ends snap to the nearest end point
    assert encode_telecommands([t("08:10:00"), t("08:10:45")], grid).tolist() == [1, 0, 1]


@given(st.lists(st.integers(0, 1000), max_size=30), st.integers(1, 50))
def test_no_telecommand_dropped(ex, res):
    grid = np.arange(0, 1001 + res, res, dtype=np.int64)
    out = encode_telecommands(ex, grid)
    k = np.searchsorted(grid, ex, side="left")
    assert out[k].all() and out.sum() == len(set(k.tolist()))


def test_preprocess_mission_end_to_end():
    ts = np.arange(0, 1000, 7, dtype=np.int64)
    chans = {"a": ChannelSeries("a", ts, np.sin(ts / 50.0)), "b": ChannelSeries("b", ts + 3, (ts // 100 % 2) * 1.0)}
    segs = {"a": S((100, 140))}
    pm = preprocess_mission(chans, segs, ResampleSpec.from_resolution(10), {}, train_window=TimeInterval(0, 499),
                            telecommands={"tc": np.array([55, 56, 300])})
    assert pm.params["b"].kind is ChannelKind.BINARY
    assert pm.labels["a"].any() and not pm.labels["b"].any()
    nominal_train = (pm.timeline <= 499) & ~pm.labels["a"].astype(bool)
    assert abs(pm.values["a"][nominal_train].mean()) < 1e-9
    assert pm.telecommands["tc"].sum() == 2


def test_preprocess_falls_back_when_fit_fails():
    ts = np.arange(0, 100, 10, dtype=np.int64)
    chans = {"a": ChannelSeries("a", ts, np.where(ts > 50, 1.0, 0.0))}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pm = preprocess_mission(chans, {}, ResampleSpec.from_resolution(10), {"a": ChannelKind.BINARY},
                                train_window=TimeInterval(0, 40))
    assert pm.params["a"].kind is ChannelKind.CONSTANT
