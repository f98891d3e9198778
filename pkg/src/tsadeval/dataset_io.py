"""Mission dataset layout, detection files and metric reports.

On-disk layout of a mission directory::

    channels.csv        Channel,Subsystem,Group,Unit,Target,Kind
    telecommands.csv    Telecommand,Priority
    labels.csv          ID,Channel,StartTime,EndTime
    anomaly_types.csv   ID,Class,Subclass,Category,Dimensionality,Locality,Length
    channels/<name>.csv        timestamp,value
    telecommands/<name>.csv    timestamp

Timestamps are ISO-8601 UTC, ``YYYY-MM-DDThh:mm:ss[.fffffffff]Z``. Files are
UTF-8 with a mandatory header row; ``\\r\\n`` line endings are accepted.
"""

from __future__ import annotations

import csv
import io
import json
import re
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .datamodel import (
    GLOBAL_CHANNEL,
    NS_PER_S,
    PRF,
    AnomalyTypeAttributes,
    ChannelKind,
    ChannelMeta,
    ChannelSeries,
    DetectionSet,
    EventAnnotation,
    EventCategory,
    IntervalSet,
    MetricReport,
    TimeInterval,
    TimingScore,
    ValidationError,
)


class ParseError(ValidationError):
    """A file could not be parsed; carries the file name and 1-based line number."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class DataWarning(UserWarning):
    pass


# --- timestamps -------------------------------------------------------------

_TS_PATTERN = r"(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?Z"
_TS_RE = re.compile(f"^{_TS_PATTERN}$")
_TS_BULK_RE = re.compile(r"(?:\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d{1,9})?Z\n)*")
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def parse_timestamp(text: str) -> int:
    """Parse one ISO-8601 UTC timestamp into integer nanoseconds since the epoch."""
    m = _TS_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad timestamp {text!r}")
    y, mo, d, h, mi, s, frac = m.groups()
    dt = datetime(int(y), int(mo), int(d), int(h), int(mi), int(s), tzinfo=timezone.utc)
    delta = dt - _EPOCH
    secs = delta.days * 86_400 + delta.seconds
    return secs * NS_PER_S + (int(frac.ljust(9, "0")) if frac else 0)


def format_timestamp(ns: int) -> str:
    """Canonical form: fractional seconds only when non-zero, trailing zeros trimmed."""
    return format_timestamps(np.array([ns], dtype=np.int64))[0]


def parse_timestamps(texts: Sequence[str], path="<memory>", first_line: int = 2) -> np.ndarray:
    """Vectorised :func:`parse_timestamp`; errors report the offending line."""
    arr = np.asarray(texts, dtype=str)
    if len(arr) == 0:
        return np.empty(0, dtype=np.int64)
    if _TS_BULK_RE.fullmatch("\n".join(arr.tolist()) + "\n"):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                return np.array(np.char.rstrip(arr, "Z"), dtype="datetime64[ns]").astype(np.int64)
        except (ValueError, Warning):
            pass
    # slow path pins down the first bad row
    out = np.empty(len(arr), dtype=np.int64)
    for i, t in enumerate(arr.tolist()):
        try:
            out[i] = parse_timestamp(t)
        except ValueError as exc:
            raise ParseError(path, first_line + i, str(exc)) from None
    return out


def format_timestamps(ns: np.ndarray) -> list[str]:
    ns = np.asarray(ns, dtype=np.int64)
    secs = np.floor_divide(ns, NS_PER_S)
    frac = ns - secs * NS_PER_S
    base = np.datetime_as_string(secs.astype("datetime64[s]"), unit="s")
    out = [b + "Z" for b in base.tolist()]
    for i in np.flatnonzero(frac).tolist():
        out[i] = f"{base[i]}.{int(frac[i]):09d}".rstrip("0") + "Z"
    return out


# --- generic CSV helpers ----------------------------------------------------

def _read_rows(path, expected: Sequence[str], optional: Sequence[str] = ()) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text, newline="")))
    if not rows:
        raise ParseError(path, None, "empty file (header row is mandatory)")
    header = [h.strip() for h in rows[0]]
    required = list(expected)
    if header[: len(required)] != required or any(h not in optional for h in header[len(required):]):
        raise ParseError(path, 1, f"expected header {','.join(list(expected) + list(optional))}, got {','.join(header)}")
    body = []
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(required):
            raise ParseError(path, n, f"expected {len(header)} fields, got {len(row)}")
        body.append((n, [c.strip() for c in row]))
    return header, body


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _ts(path, line: int, text: str) -> int:
    try:
        return parse_timestamp(text)
    except ValueError as exc:
        raise ParseError(path, line, str(exc)) from None


# --- labels -----------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class LabelRow:
    id: str
    channel: str
    interval: TimeInterval


def parse_labels(path) -> list[LabelRow]:
    _, body = _read_rows(path, ["ID", "Channel", "StartTime", "EndTime"])
    out: list[LabelRow] = []
    lines: dict[tuple[str, str], list[tuple[TimeInterval, int]]] = {}
    for n, row in body:
        start, end = _ts(path, n, row[2]), _ts(path, n, row[3])
        if end < start:
            raise ParseError(path, n, f"EndTime before StartTime for {row[0]}/{row[1]}")
        rec = LabelRow(row[0], row[1], TimeInterval(start, end))
        out.append(rec)
        lines.setdefault((rec.id, rec.channel), []).append((rec.interval, n))
    for (eid, ch), ivs in lines.items():
        ivs.sort(key=lambda p: (p[0].start, p[0].end))
        for (a, _), (b, n) in zip(ivs, ivs[1:]):
            if b.start <= a.end:
                raise ParseError(path, n, f"overlapping segments for event {eid} on channel {ch}")
    return out


def write_labels(path, events: Iterable[EventAnnotation]) -> None:
    rows = []
    for ev in events:
        for ch, segs in ev.segments.items():
            for s, e in zip(format_timestamps(segs.starts), format_timestamps(segs.ends)):
                rows.append((ev.id, ch, s, e))
    _write_csv(path, ["ID", "Channel", "StartTime", "EndTime"], rows)


# --- channels.csv -----------------------------------------------------------

def parse_channels(path) -> list[ChannelMeta]:
    header, body = _read_rows(path, ["Channel", "Subsystem", "Group", "Unit", "Target"], optional=["Kind"])
    out: list[ChannelMeta] = []
    seen: set[str] = set()
    for n, row in body:
        name = row[0]
        if name in seen:
            raise ParseError(path, n, f"duplicate channel name {name}")
        seen.add(name)
        target = row[4].lower()
        if target not in ("true", "false"):
            raise ParseError(path, n, f"Target must be true or false, got {row[4]!r}")
        try:
            group = int(row[2]) if row[2] else 0
        except ValueError:
            raise ParseError(path, n, f"Group must be an integer, got {row[2]!r}") from None
        try:
            kind = ChannelKind.parse(row[5] if len(row) > 5 else "")
        except ValidationError as exc:
            raise ParseError(path, n, str(exc)) from None
        out.append(ChannelMeta(name, row[1], group, row[3], target == "true", kind))
    return out


def write_channels(path, metas: Iterable[ChannelMeta]) -> None:
    _write_csv(path, ["Channel", "Subsystem", "Group", "Unit", "Target", "Kind"],
               [(m.name, m.subsystem, m.group, m.unit, str(m.target).lower(),
                 "" if m.kind is ChannelKind.AUTO else m.kind.value) for m in metas])


# --- anomaly_types.csv ------------------------------------------------------

@dataclass(frozen=True, slots=True)
class AnomalyTypeRecord:
    class_: str
    subclass: str
    category: EventCategory
    attributes: Optional[AnomalyTypeAttributes]


def parse_anomaly_types(path) -> dict[str, AnomalyTypeRecord]:
    _, body = _read_rows(path, ["ID", "Class", "Subclass", "Category", "Dimensionality", "Locality", "Length"])
    out: dict[str, AnomalyTypeRecord] = {}
    for n, row in body:
        row = row + [""] * (7 - len(row))
        eid = row[0]
        if eid in out:
            raise ParseError(path, n, f"duplicate event id {eid}")
        try:
            category = EventCategory.parse(row[3])
        except ValidationError as exc:
            raise ParseError(path, n, str(exc)) from None
        attr_cols = row[4:7]
        attrs = None
        if any(attr_cols):
            if not category.has_attributes:
                warnings.warn(f"{path}:{n}: attributes given for {category.value} event {eid}; dropped",
                              DataWarning, stacklevel=2)
            else:
                try:
                    attrs = AnomalyTypeAttributes.parse(*attr_cols)
                except ValidationError as exc:
                    raise ParseError(path, n, str(exc)) from None
        out[eid] = AnomalyTypeRecord(row[1], row[2], category, attrs)
    return out


def write_anomaly_types(path, events: Iterable[EventAnnotation]) -> None:
    rows = []
    for ev in events:
        attrs = ev.attributes.tokens() if ev.attributes and ev.category.has_attributes else ("", "", "")
        rows.append((ev.id, ev.class_, ev.subclass, ev.category.value, *attrs))
    _write_csv(path, ["ID", "Class", "Subclass", "Category", "Dimensionality", "Locality", "Length"], rows)


# --- series -----------------------------------------------------------------

def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.replace("\r\n", "\n").split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def load_channel_series(path, name: Optional[str] = None) -> ChannelSeries:
    path = Path(path)
    name = name or path.stem
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, None, "empty file")
    if lines[0].strip() != "timestamp,value":
        raise ParseError(path, 1, f"expected header timestamp,value, got {lines[0]!r}")
    if len(lines) == 1:
        raise ParseError(path, None, "no samples")
    ts_txt, val_txt = [], []
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(path, n, f"expected 2 fields, got {len(parts)}")
        ts_txt.append(parts[0].strip())
        val_txt.append(parts[1].strip())
    ts = parse_timestamps(ts_txt, path)
    try:
        vals = np.array(val_txt, dtype=np.float64)
    except ValueError:
        for n, v in enumerate(val_txt, start=2):
            try:
                float(v)
            except ValueError:
                raise ParseError(path, n, f"bad value {v!r}") from None
        raise
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        raise ParseError(path, int(bad[0]) + 2, f"non-finite value {val_txt[bad[0]]!r}")
    nonmono = np.flatnonzero(ts[1:] <= ts[:-1])
    if len(nonmono):
        raise ParseError(path, int(nonmono[0]) + 3, "timestamps not strictly increasing")
    return ChannelSeries(name, ts, vals)


def write_channel_series(path, series: ChannelSeries) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamps = format_timestamps(series.timestamps)
    vals = [repr(v) for v in series.values.tolist()]
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp,value\n")
        fh.write("".join(f"{t},{v}\n" for t, v in zip(stamps, vals)))


def load_telecommand(path) -> np.ndarray:
    path = Path(path)
    lines = _read_lines(path)
    if not lines or lines[0].strip() != "timestamp":
        raise ParseError(path, 1, "expected header timestamp")
    ts = parse_timestamps([l.strip() for l in lines[1:]], path)
    nonmono = np.flatnonzero(ts[1:] <= ts[:-1])
    if len(nonmono):
        raise ParseError(path, int(nonmono[0]) + 3, "timestamps not strictly increasing")
    return ts


def write_telecommand(path, executions: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp\n")
        fh.write("".join(t + "\n" for t in format_timestamps(executions)))


def parse_telecommands_meta(path) -> dict[str, int]:
    _, body = _read_rows(path, ["Telecommand", "Priority"])
    out: dict[str, int] = {}
    for n, row in body:
        try:
            prio = int(row[1])
        except ValueError:
            raise ParseError(path, n, f"bad priority {row[1]!r}") from None
        if not 0 <= prio <= 3:
            raise ParseError(path, n, f"priority must be in 0..3, got {prio}")
        if row[0] in out:
            raise ParseError(path, n, f"duplicate telecommand {row[0]}")
        out[row[0]] = prio
    return out


# --- mission dataset --------------------------------------------------------

@dataclass
class MissionDataset:
    channels: dict[str, ChannelSeries]
    telecommands: dict[str, np.ndarray]
    channel_meta: list[ChannelMeta]
    events: list[EventAnnotation]
    tc_priority: dict[str, int] = field(default_factory=dict)
    anomaly_types: Optional[dict[str, AnomalyTypeRecord]] = None

    def __post_init__(self):
        if self.anomaly_types is None:
            self.anomaly_types = {ev.id: AnomalyTypeRecord(ev.class_, ev.subclass, ev.category, ev.attributes)
                                  for ev in self.events}

    @property
    def meta_by_name(self) -> dict[str, ChannelMeta]:
        return {m.name: m for m in self.channel_meta}

    @property
    def target_channels(self) -> list[str]:
        return [m.name for m in self.channel_meta if m.target]

    def time_span(self) -> TimeInterval:
        spans = [s.time_span for s in self.channels.values() if len(s)]
        if not spans:
            raise ValidationError("dataset has no samples")
        return TimeInterval(min(s.start for s in spans), max(s.end for s in spans))


def build_events(labels: Iterable[LabelRow], types: Mapping[str, AnomalyTypeRecord]) -> list[EventAnnotation]:
    """Group label rows into events; ids missing from ``types`` default to Anomaly."""
    grouped: dict[str, dict[str, list[TimeInterval]]] = {}
    for r in labels:
        grouped.setdefault(r.id, {}).setdefault(r.channel, []).append(r.interval)
    out = []
    for eid, per_ch in grouped.items():
        rec = types.get(eid)
        segs = {ch: IntervalSet(ivs) for ch, ivs in per_ch.items()}
        if rec is None:
            out.append(EventAnnotation(eid, EventCategory.ANOMALY, segments=segs))
        else:
            out.append(EventAnnotation(eid, rec.category, rec.class_, rec.subclass, segs, rec.attributes))
    return out


def load_dataset(root, *, load_series: bool = True) -> MissionDataset:
    root = Path(root)
    metas = parse_channels(root / "channels.csv")
    labels = parse_labels(root / "labels.csv") if (root / "labels.csv").exists() else []
    types = parse_anomaly_types(root / "anomaly_types.csv") if (root / "anomaly_types.csv").exists() else {}
    tc_meta = parse_telecommands_meta(root / "telecommands.csv") if (root / "telecommands.csv").exists() else {}
    series: dict[str, ChannelSeries] = {}
    tcs: dict[str, np.ndarray] = {}
    if load_series:
        for m in metas:
            p = root / "channels" / f"{m.name}.csv"
            if p.exists():
                series[m.name] = load_channel_series(p, m.name)
        for name in tc_meta:
            p = root / "telecommands" / f"{name}.csv"
            if p.exists():
                tcs[name] = load_telecommand(p)
    return MissionDataset(series, tcs, metas, build_events(labels, types), tc_meta, types)


def save_dataset(ds: MissionDataset, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_channels(root / "channels.csv", ds.channel_meta)
    write_labels(root / "labels.csv", ds.events)
    write_anomaly_types(root / "anomaly_types.csv", ds.events)
    _write_csv(root / "telecommands.csv", ["Telecommand", "Priority"], sorted(ds.tc_priority.items()))
    for name, s in ds.channels.items():
        write_channel_series(root / "channels" / f"{name}.csv", s)
    for name, ex in ds.telecommands.items():
        write_telecommand(root / "telecommands" / f"{name}.csv", ex)


@dataclass(frozen=True, slots=True)
class Finding:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_dataset(ds: MissionDataset) -> list[Finding]:
    """Check cross-file invariants; an empty list means the dataset is consistent."""
    findings: list[Finding] = []
    metas = ds.meta_by_name
    if len(metas) != len(ds.channel_meta):
        findings.append(Finding("duplicate-channel", "channel names are not unique"))
    ids = [ev.id for ev in ds.events]
    for eid in sorted({i for i in ids if ids.count(i) > 1}):
        findings.append(Finding("duplicate-event-id", f"event {eid} defined more than once"))
    types = ds.anomaly_types or {}
    for ev in ds.events:
        if ev.id not in types:
            findings.append(Finding("missing-anomaly-type", f"event {ev.id} is labelled but absent from anomaly_types"))
        elif types[ev.id].attributes is not None and not types[ev.id].category.has_attributes:
            findings.append(Finding("attributes-on-gap", f"event {ev.id} is a {types[ev.id].category.value} with attributes"))
        for ch, segs in ev.segments.items():
            meta = metas.get(ch)
            if meta is None:
                findings.append(Finding("unknown-channel", f"event {ev.id} annotates unknown channel {ch}"))
                continue
            if not meta.target:
                findings.append(Finding("annotation-on-non-target", f"event {ev.id} annotates non-target channel {ch}"))
            series = ds.channels.get(ch)
            if series is not None and len(series) and len(segs):
                span = series.time_span
                if segs.starts[0] < span.start or segs.ends[-1] > span.end:
                    findings.append(Finding("segment-outside-series",
                                            f"event {ev.id} on {ch} extends beyond the recorded series"))
    labelled = {ev.id for ev in ds.events}
    for eid in sorted(set(types) - labelled):
        findings.append(Finding("unlabelled-anomaly-type", f"anomaly_types lists {eid} but labels do not"))
    for m in ds.channel_meta:
        if m.name not in ds.channels:
            findings.append(Finding("missing-series", f"no samples for channel {m.name}"))
    for name, prio in ds.tc_priority.items():
        if not 0 <= prio <= 3:
            findings.append(Finding("tc-priority-range", f"telecommand {name} has priority {prio}"))
    return findings


# --- detections ---------------------------------------------------------------

def write_detections(path, d: DetectionSet) -> None:
    rows = []
    items = list(d.per_channel.items())
    if len(d.global_only):
        items.append((GLOBAL_CHANNEL, d.global_only))
    for ch, segs in items:
        for s, e in zip(format_timestamps(segs.starts), format_timestamps(segs.ends)):
            rows.append((ch, s, e))
    _write_csv(path, ["Channel", "StartTime", "EndTime"], rows)


def read_detections(path, timeline: Optional[TimeInterval] = None,
                    channels: Optional[Iterable[str]] = None) -> DetectionSet:
    """Read a detection file. Overlapping rows within a channel are merged with a warning.

    ``channels`` (metadata channel names) makes unknown channels an error.
    ``timeline`` defaults to the hull of all detections.
    """
    _, body = _read_rows(path, ["Channel", "StartTime", "EndTime"])
    known = set(channels) if channels is not None else None
    raw: dict[str, list[tuple[int, int]]] = {}
    for n, row in body:
        ch = row[0]
        if known is not None and ch != GLOBAL_CHANNEL and ch not in known:
            raise ParseError(path, n, f"unknown channel {ch}")
        s, e = _ts(path, n, row[1]), _ts(path, n, row[2])
        if e < s:
            raise ParseError(path, n, "EndTime before StartTime")
        raw.setdefault(ch, []).append((s, e))
    sets: dict[str, IntervalSet] = {}
    for ch, pairs in raw.items():
        merged = IntervalSet(pairs)
        if len(merged) < len(pairs):
            warnings.warn(f"{path}: overlapping detections on {ch} merged", DataWarning, stacklevel=2)
        sets[ch] = merged
    glob = sets.pop(GLOBAL_CHANNEL, IntervalSet())
    if timeline is None:
        hulls = [s.hull() for s in list(sets.values()) + [glob] if len(s)]
        timeline = (TimeInterval(min(h.start for h in hulls), max(h.end for h in hulls))
                    if hulls else TimeInterval(0, 0))
    else:
        sets = {ch: s.clip(timeline) for ch, s in sets.items()}
        glob = glob.clip(timeline)
    return DetectionSet(sets, timeline, glob)


# --- metric reports ---------------------------------------------------------

def report_to_dict(r: MetricReport) -> dict:
    out: dict[str, object] = {"algorithm": r.algorithm}
    out.update(r.scores())
    out["beta"] = r.beta
    out["excluded_categories"] = list(r.excluded_categories)
    return out


def report_from_dict(d: Mapping) -> MetricReport:
    def prf(name):
        vals = [d.get(f"{name}.{k}") for k in ("precision", "recall", "fbeta")]
        return None if any(v is None for v in vals) else PRF(*map(float, vals))

    return MetricReport(
        event_f=prf("event_f"),
        subsystem_f=prf("subsystem_f"),
        channel_f=prf("channel_f"),
        alarming_precision=float(d["alarming_precision"]),
        adtqc=TimingScore(float(d["adtqc.score"]), float(d["adtqc.after_ratio"])),
        affiliation=prf("affiliation"),
        beta=float(d["beta"]),
        excluded_categories=list(d.get("excluded_categories", [])),
        algorithm=str(d.get("algorithm", "")),
    )


def write_report(path, r: MetricReport) -> None:
    Path(path).write_text(json.dumps(report_to_dict(r), indent=2) + "\n", encoding="utf-8")


def read_report(path) -> MetricReport:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    r = report_from_dict(d)
    if not r.algorithm:
        r = MetricReport(**{**r.__dict__, "algorithm": Path(path).stem})
    return r
