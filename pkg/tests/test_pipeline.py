import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import S
from oracles import reference_rank
from tsadeval.dataset_io import MissionDataset
from tsadeval.datamodel import (
    PRF,
    ChannelMeta,
    ChannelSeries,
    DetectionSet,
    Dimensionality,
    EventAnnotation,
    EventCategory,
    MetricReport,
    TimeInterval,
    TimingScore,
    ValidationError,
    union_all,
)
from tsadeval.pipeline import (
    DEFAULT_PHASES,
    MONTH,
    WEEK,
    EvalOptions,
    PhaseSpec,
    SplitSpec,
    _restrict_to_subset,
    hierarchical_rank,
    phase_splits,
    round_sig,
    run_evaluation,
    split_mission,
)
from tsadeval.synthgen import ALL_TYPES, EventSpec, SynthConfig, generate_mission


def mission(ts, events=()):
    ts = np.asarray(ts, dtype=np.int64)
    return MissionDataset({"a": ChannelSeries("a", ts, np.zeros(len(ts)))}, {},
                          [ChannelMeta("a", "s", 0, "", True)], list(events))


# --- splits ---------------------------------------------------------------------

@pytest.mark.parametrize("months, train_months", [(168, 84), (42, 21)])
def test_canonical_halves(months, train_months):
    sp = split_mission(mission([0, months * MONTH]))
    assert sp.test == TimeInterval(train_months * MONTH, months * MONTH)
    assert sp.validation == TimeInterval((train_months - 3) * MONTH, train_months * MONTH - 1)
    assert sp.train == TimeInterval(0, (train_months - 3) * MONTH - 1)
    assert sp.training_half == TimeInterval(0, train_months * MONTH - 1)


def test_split_errors():
    with pytest.raises(ValidationError):
        split_mission(mission([0, 10 * MONTH]), SplitSpec(train_fraction=1.0))
    with pytest.raises(ValidationError):
        split_mission(mission([0, 4 * MONTH]))  # the tail does not fit into two months
    with pytest.raises(ValidationError):
        SplitSpec(train_fraction=0)
    with pytest.raises(ValidationError):
        split_mission(MissionDataset({}, {}, [], []))


def test_events_follow_their_start():
    evs = [EventAnnotation("straddle", EventCategory.ANOMALY, segments={"a": S((9 * MONTH, 11 * MONTH))}),
           EventAnnotation("late", EventCategory.ANOMALY, segments={"a": S((15 * MONTH, 15 * MONTH))}),
           EventAnnotation("early", EventCategory.ANOMALY, segments={"a": S((MONTH, MONTH))})]
    sp = split_mission(mission([0, 20 * MONTH], evs))
    assert sp.events == {"train": ("early",), "validation": ("straddle",), "test": ("late",)}


@given(st.lists(st.integers(0, 10 ** 12), min_size=2, max_size=200, unique=True),
       st.floats(0.05, 0.95), st.floats(0, 0.9))
def test_splits_never_leak(ts, fraction, tail_share):
    ts = sorted(ts)
    ds = mission(ts)
    span = ts[-1] - ts[0]
    mid = round(fraction * span)
    tail = int(tail_share * mid)
    if mid >= span or tail >= mid or mid == 0:
        return
    sp = split_mission(ds, SplitSpec(fraction, tail))
    assert sp.train.end < (sp.validation.start if sp.validation else sp.test.start)
    assert sp.training_half.end < sp.test.start
    idx = sp.indices["a"]
    t = np.asarray(ts)
    parts = [t[slice(*idx[k])] for k in ("train", "validation", "test")]
    assert sum(len(p) for p in parts) == len(t)
    nonempty = [p for p in parts if len(p)]
    assert all(a[-1] < b[0] for a, b in zip(nonempty, nonempty[1:]))


def test_phase_examples():
    ds = mission([0, 168 * MONTH])
    m1 = phase_splits(ds, DEFAULT_PHASES["mission1"])
    assert m1[2].train == TimeInterval(0, 18 * MONTH - 1)
    assert m1[2].validation == TimeInterval(18 * MONTH, 21 * MONTH - 1)
    assert all(s.test == TimeInterval(84 * MONTH, 168 * MONTH) for s in m1)
    m2 = phase_splits(mission([0, 42 * MONTH]), DEFAULT_PHASES["mission2"])
    assert m2[0].train.duration == 3 * WEEK - 1 and m2[0].validation.duration == WEEK - 1


def test_custom_phase_equals_default_split():
    ds = mission(np.linspace(0, 168 * MONTH, 1000).astype(np.int64))
    (ph,) = phase_splits(ds, PhaseSpec(((81 * MONTH, 3 * MONTH),)))
    assert ph == split_mission(ds)


def test_phase_errors():
    with pytest.raises(ValidationError):
        PhaseSpec(((2 * MONTH, MONTH), (MONTH, MONTH)))
    with pytest.raises(ValidationError):
        phase_splits(mission([0, 10 * MONTH]), DEFAULT_PHASES["mission1"])


# --- evaluation ------------------------------------------------------------------

def perfect_detections(ds):
    per = {c: union_all(ev.segments[c] for ev in ds.events if c in ev.segments) for c in ds.channels}
    return DetectionSet(per, ds.time_span())


@pytest.fixture(scope="module")
def synth():
    return generate_mission(SynthConfig(seed=3, n_channels=4, events=tuple(
        EventSpec(attributes=a) for a in ALL_TYPES) + (EventSpec(EventCategory.RARE_NOMINAL, "rn", ALL_TYPES[0]),)))


def test_perfect_detections_score_one(synth):
    rep = run_evaluation(synth, perfect_detections(synth), EvalOptions(algorithm="oracle"))
    for k in ("event_f.fbeta", "subsystem_f.fbeta", "channel_f.fbeta", "alarming_precision", "adtqc.score",
              "affiliation.fbeta"):
        assert rep.scores()[k] == 1.0, k
    assert rep.algorithm == "oracle" and rep.beta == 0.5


def test_namespace_mismatch(synth):
    bad = DetectionSet({"nope": S((0, 1))}, TimeInterval(0, 10))
    with pytest.raises(ValidationError):
        run_evaluation(synth, bad)


def test_channel_subset_reinfers_types(synth):
    multi = next(ev for ev in synth.events if ev.attributes and ev.attributes.dimensionality
                 is Dimensionality.MULTIVARIATE)
    ch = multi.channels[0]
    meta, events = _restrict_to_subset(synth, [ch])
    assert [m.name for m in meta] == [ch]
    assert all(set(ev.channels) == {ch} for ev in events)
    assert next(ev for ev in events if ev.id == multi.id).attributes.dimensionality is Dimensionality.UNIVARIATE
    # detections only on the subset channel still recall every event of the subset
    det = perfect_detections(synth)
    det = DetectionSet({ch: det.per_channel[ch]}, det.timeline)
    rep = run_evaluation(synth, det, EvalOptions(channels=(ch,)))
    assert rep.event_f.recall == 1.0
    # multivariate exclusion no longer applies on one channel
    rep = run_evaluation(synth, det, EvalOptions.with_exclusions(["Multivariate"], channels=(ch,)))
    assert rep.event_f.recall == 1.0
    with pytest.raises(ValidationError):
        run_evaluation(synth, det, EvalOptions(channels=("missing",)))


def test_anomalies_only_and_exclusions(synth):
    rn = next(ev for ev in synth.events if ev.category is EventCategory.RARE_NOMINAL)
    det = perfect_detections(synth)
    only_rn = DetectionSet({c: rn.segments.get(c, S()) for c in synth.channels}, det.timeline)
    assert run_evaluation(synth, only_rn).event_f.recall > 0
    anomaly = next(ev for ev in synth.events if ev.category is EventCategory.ANOMALY)
    one = DetectionSet({c: anomaly.segments.get(c, S()) for c in synth.channels}, det.timeline)
    both = DetectionSet({c: one.per_channel[c].union(only_rn.per_channel[c]) for c in synth.channels},
                        det.timeline)
    # the rare nominal detection is ignored rather than counted as a false alarm
    opts = EvalOptions(anomalies_only=True)
    assert run_evaluation(synth, both, opts).event_f == run_evaluation(synth, one, opts).event_f
    assert run_evaluation(synth, both).event_f.recall > run_evaluation(synth, one).event_f.recall
    opts = EvalOptions.with_exclusions(["RareNominal", f"id:{rn.id}", "class:x", "Point"])
    assert opts.excluded_ids == {rn.id} and opts.excluded_classes == {"x"} and opts.excluded_types == {"Point"}
    with pytest.raises(ValidationError):
        EvalOptions.with_exclusions(["Sideways"])


def test_window_keeps_events_starting_inside(synth):
    det = perfect_detections(synth)
    sp = split_mission(synth, SplitSpec(validation_tail=0))
    rep = run_evaluation(synth, det, EvalOptions(window=sp.test))
    assert rep.event_f.fbeta == 1.0


# --- ranking -----------------------------------------------------------------------

def report(name, ef, ap=1.0, adtqc=1.0, aff=1.0, channel=True):
    prf = PRF(ef, ef, ef)
    ch = PRF(0.5, 0.5, 0.5) if channel else None
    return MetricReport(prf, ch, ch, ap, TimingScore(adtqc, 1.0), PRF(aff, aff, aff), 0.5, (), name)


def test_rank_examples():
    r = hierarchical_rank([report("GlobalSTD5", 0.253), report("Pruned", 0.786)])
    assert [x.algorithm for x in r] == ["Pruned", "GlobalSTD5"] and [x.rank for x in r] == [1, 2]
    r = hierarchical_rank([report("low", 0.5001, ap=0.1), report("high", 0.4996, ap=0.9)])
    assert [x.algorithm for x in r] == ["high", "low"]
    r = hierarchical_rank([report("x", 0.4), report("y", 0.4)])
    assert [x.rank for x in r] == [1, 1]


def test_missing_level_skipped_with_warning():
    with pytest.warns(UserWarning):
        r = hierarchical_rank([report("a", 0.5, ap=0.2), report("b", 0.5, ap=0.3, channel=False)])
    assert r[0].algorithm == "b" and r[0].scores[1] is None


def test_round_sig_boundary():
    assert round_sig(0.78649) == 0.786 and round_sig(0.78651) == 0.787
    assert round_sig(0.0012345) == 0.00123 and round_sig(1.0) == 1.0 and round_sig(0.0) == 0.0


score = st.sampled_from([0.0, 0.1, 0.25, 0.2501, 0.5, 0.7864, 0.7866, 1.0])


@given(st.lists(st.tuples(score, score, score, score), min_size=1, max_size=8), st.randoms())
def test_rank_matches_reference_and_ignores_order(rows, rnd):
    reports = [report(f"alg{i}", ef, ap, ad, af) for i, (ef, ap, ad, af) in enumerate(rows)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ranked = hierarchical_rank(reports)
    ref_rows = [(r.algorithm, tuple(round_sig(v) for v in (r.event_f.fbeta, 0.5, 0.5, r.alarming_precision,
                                                           r.adtqc.score, r.affiliation.fbeta)))
                for r in reports]
    order, ranks = reference_rank(ref_rows)
    assert [x.algorithm for x in ranked] == order
    assert {x.algorithm: x.rank for x in ranked} == ranks
    shuffled = reports[:]
    rnd.shuffle(shuffled)
    again = hierarchical_rank(shuffled)
    assert [(x.algorithm, x.rank) for x in again] == [(x.algorithm, x.rank) for x in ranked]


def test_rank_empty():
    with pytest.raises(ValidationError):
        hierarchical_rank([])
