"""Command-line interface.

Exit codes: 0 success, 1 validation findings, 2 errors (including usage errors).
A ``--config`` file holds flat ``key = value`` lines mirroring long flags
(``target-hz = 0.1``); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from . import detectors as det
from .dataset_io import (
    load_dataset,
    read_detections,
    read_report,
    report_to_dict,
    save_dataset,
    validate_dataset,
    write_anomaly_types,
    write_detections,
    write_report,
)
from .datamodel import NS_PER_DAY, ChannelSeries, ValidationError
from .pipeline import (
    DEFAULT_PHASES,
    LEVELS,
    EvalOptions,
    SplitSpec,
    hierarchical_rank,
    phase_splits,
    run_evaluation,
    split_mission,
)
from .preprocess import ResampleSpec, annotated_segments, preprocess_mission
from .synthgen import SynthConfig, generate_mission
from .taxonomy import infer_all

log = logging.getLogger("tsadeval")

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2


def _emit(obj, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        json.dump(obj, out, indent=2, sort_keys=False)
        out.write("\n")
        return
    if isinstance(obj, dict):
        width = max((len(k) for k in obj), default=0)
        for k, v in obj.items():
            out.write(f"{k:<{width}}  {_cell(v)}\n")
    else:
        rows = [list(map(_cell, r)) for r in obj]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))] if rows else []
        for r in rows:
            out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def _cell(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ",".join(map(str, v))
    return str(v)


def _split_spec(a) -> SplitSpec:
    return SplitSpec(a.train_fraction, round(a.validation_days * NS_PER_DAY))


# --- subcommands -------------------------------------------------------------

def cmd_validate(a) -> int:
    ds = load_dataset(a.root)
    findings = validate_dataset(ds)
    if a.format == "json":
        _emit([{"code": f.code, "message": f.message} for f in findings], "json")
    else:
        for f in findings:
            print(f)
        print(f"{len(findings)} finding(s)")
    return EXIT_FINDINGS if findings else EXIT_OK


def cmd_synth(a) -> int:
    cfg = SynthConfig(seed=a.seed, n_channels=a.n_channels, n_subsystems=a.n_subsystems,
                      duration=round(a.days * NS_PER_DAY), base_rate_hz=a.rate_hz, rate_jitter=a.jitter,
                      anomaly_density=a.density)
    save_dataset(generate_mission(cfg), a.out)
    return EXIT_OK


def cmd_preprocess(a) -> int:
    ds = load_dataset(a.root)
    split = split_mission(ds, _split_spec(a))
    kinds = {m.name: m.kind for m in ds.channel_meta}
    pm = preprocess_mission(ds.channels, annotated_segments(ds.events), ResampleSpec(a.target_hz), kinds,
                            train_window=split.training_half, telecommands=ds.telecommands)
    channels = {c: ChannelSeries(c, pm.timeline, v) for c, v in pm.values.items()}
    tcs = {c: pm.timeline[v.astype(bool)] for c, v in pm.telecommands.items()}
    out = type(ds)(channels, tcs, ds.channel_meta, ds.events, ds.tc_priority, ds.anomaly_types)
    save_dataset(out, a.out)
    params = {c: p.to_dict() for c, p in pm.params.items()}
    (Path(a.out) / "standardization.json").write_text(json.dumps(params, indent=2) + "\n")
    return EXIT_OK


def cmd_infer_types(a) -> int:
    ds = load_dataset(a.root)
    inferred = infer_all(ds.events, ds.channels, a.channels)
    rows = [["ID", "Dimensionality", "Locality", "Length"]]
    rows += [[eid, *attrs.tokens()] for eid, attrs in sorted(inferred.items())]
    if a.format == "json":
        _emit({eid: list(attrs.tokens()) for eid, attrs in sorted(inferred.items())}, "json")
    else:
        _emit(rows, "table")
    if a.write:
        events = [ev.with_attributes(inferred[ev.id]) if ev.id in inferred else ev for ev in ds.events]
        write_anomaly_types(Path(a.root) / "anomaly_types.csv", events)
    return EXIT_OK


def cmd_split(a) -> int:
    ds = load_dataset(a.root)
    splits = phase_splits(ds, DEFAULT_PHASES[a.phases], a.train_fraction) if a.phases else \
        [split_mission(ds, _split_spec(a))]

    def iv(t):
        return None if t is None else [t.start, t.end]
    out = [{"train": iv(s.train), "validation": iv(s.validation), "test": iv(s.test),
            "events": {k: list(v) for k, v in s.events.items()}} for s in splits]
    _emit(out if a.phases else out[0], "json")
    return EXIT_OK


def cmd_fit(a) -> int:
    ds = load_dataset(a.root)
    half = split_mission(ds, _split_spec(a)).training_half
    names = a.channels or ds.target_channels
    train = {c: ds.channels[c].slice_time(half) for c in names}
    segs = annotated_segments(ds.events)
    if a.detector == "globalstd":
        model = det.fit_globalstd(train, segs, a.n_sigmas)
    else:
        model = det.fit_limits(train, segs)
    det.save_model(a.out, model)
    return EXIT_OK


def cmd_detect(a) -> int:
    ds = load_dataset(a.root)
    model = det.load_model(a.model)
    channels = {c: ds.channels[c] for c in model.params}
    write_detections(a.out, det.detect(channels, model, ds.time_span()))
    return EXIT_OK


def cmd_evaluate(a) -> int:
    ds = load_dataset(a.gt)
    dets = read_detections(a.det, ds.time_span())
    window = split_mission(ds, _split_spec(a)).test if a.window == "test" else None
    opts = EvalOptions.with_exclusions(a.exclude, beta=a.beta, channels=tuple(a.channels) if a.channels else None,
                                       anomalies_only=a.anomalies_only, window=window,
                                       algorithm=a.name or Path(a.det).stem)
    report = run_evaluation(ds, dets, opts)
    if a.out:
        write_report(a.out, report)
    _emit(report_to_dict(report), a.format)
    return EXIT_OK


def cmd_rank(a) -> int:
    reports = [read_report(p) for p in a.reports]
    ranked = hierarchical_rank(reports)
    if a.format == "json":
        _emit([{"rank": r.rank, "algorithm": r.algorithm, **dict(zip(LEVELS, r.scores))} for r in ranked], "json")
    else:
        _emit([["rank", "algorithm", *LEVELS]] + [[r.rank, r.algorithm, *r.scores] for r in ranked], "table")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _add_split_flags(p):
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--validation-days", type=float, default=90.0)


def _common() -> argparse.ArgumentParser:
    # a fresh parent per subparser: parents share action objects, so set_defaults would leak
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file with defaults for long flags")
    common.add_argument("--format", choices=["json", "table"], default="json")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsadeval", description="Time-series anomaly detection evaluation",
                                     parents=[_common()])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[_common()], help="check a dataset directory")
    p.add_argument("root")
    p.set_defaults(func=cmd_validate, format="table")

    p = sub.add_parser("synth", parents=[_common()], help="generate a synthetic mission")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-channels", type=int, default=4)
    p.add_argument("--n-subsystems", type=int, default=2)
    p.add_argument("--days", type=float, default=2.0)
    p.add_argument("--rate-hz", type=float, default=1 / 30)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--density", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", parents=[_common()], help="resample and standardize a mission")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--target-hz", type=float, required=True)
    _add_split_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("infer-types", parents=[_common()], help="infer anomaly type attributes")
    p.add_argument("root")
    p.add_argument("--channels", nargs="+")
    p.add_argument("--write", action="store_true", help="update anomaly_types.csv in place")
    p.set_defaults(func=cmd_infer_types, format="table")

    p = sub.add_parser("split", parents=[_common()], help="print train/validation/test boundaries")
    p.add_argument("root")
    p.add_argument("--phases", choices=sorted(DEFAULT_PHASES))
    _add_split_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", parents=[_common()], help="fit a baseline detector on the training half")
    p.add_argument("root")
    p.add_argument("--detector", choices=["globalstd", "limits"], default="globalstd")
    p.add_argument("--n-sigmas", type=float, default=3.0)
    p.add_argument("--channels", nargs="+")
    p.add_argument("--out", required=True)
    _add_split_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", parents=[_common()], help="run a fitted detector")
    p.add_argument("root")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[_common()], help="score detections against annotations")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--exclude", nargs="+", default=[],
                   help="categories, attributes, id:<ID> or class:<name> to exclude")
    p.add_argument("--channels", nargs="+")
    p.add_argument("--anomalies-only", action="store_true")
    p.add_argument("--window", choices=["all", "test"], default="all")
    p.add_argument("--name", help="algorithm name recorded in the report")
    p.add_argument("--out", help="also write the report JSON here")
    _add_split_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", parents=[_common()], help="rank metric reports hierarchically")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_rank, format="table")
    return parser


def _config_defaults(path: str, parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string("[tsadeval]\n" + Path(path).read_text())
    values = {k.replace("-", "_"): v for k, v in cp["tsadeval"].items()}
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd = next((x for x in argv if x in sub.choices), None)
    if cmd is None:
        return
    sp = sub.choices[cmd]
    defaults = {}
    for act in sp._actions:
        if act.dest not in values:
            continue
        raw = values[act.dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[act.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
        elif act.nargs in ("+", "*"):
            defaults[act.dest] = [act.type(x) if act.type else x for x in raw.split()]
        else:
            defaults[act.dest] = act.type(raw) if act.type else raw
        act.required = False
    sp.set_defaults(**defaults)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            _config_defaults(known.config, parser, argv)
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_ERROR
    except (OSError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return a.func(a)
    except (ValidationError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
