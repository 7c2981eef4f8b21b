"""
Command-line entry point.

Subcommands: generate, calibrate, detect, report, evaluate. Detector flags
may also come from a JSON file given with --config (keys mirror the flag
names); flags on the command line win.

Exit codes: 0 success, 2 success with confirmed attacks (detect only),
1 any error including usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from .alerts import AlertLog, build_advisory_report
from .calibration import (
    build_baseline,
    calibrate_th1,
    calibrate_th2,
    evaluate,
    profiles_to_json,
    read_labels,
    write_labels,
)
from .config import DetectorConfig, config_from_flags, config_to_flags
from .errors import DetectorError
from .flows import FlowKey, iter_trace, read_trace, write_trace
from .pipeline import read_verdicts, run_pipeline, write_verdicts
from .traffic_gen import AttackParams, LegitParams, standard_scenario

log = logging.getLogger("ddos_entropy")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ATTACK = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


DEFAULTS = {
    "seed": 0,
    "format": None,
    "duration": 30.0,
    "legit_rate": 200.0,
    "sources": 200,
    "destinations": 50,
    "skew": 0.0,
    "no_attack": False,
    "attack_start": 10.0,
    "attack_duration": 10.0,
    "attack_rate": 1000.0,
    "bots": 1,
    "spoof": "fixed-source",
    "victim": "203.0.113.10:80",
    "target_fpr": 0.01,
    "calibrate_th2": False,
    "workers": 1,
    "notify_out": "-",
}


def _detector_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector")
    g.add_argument("--config", help="JSON file whose keys mirror these flags")
    g.add_argument("--window-seconds", type=float)
    g.add_argument("--features", help="comma-separated: src_addr,dst_addr,src_port,dst_port,flow_size,in_degree")
    g.add_argument("--th1", type=float)
    g.add_argument("--th2", type=float)
    g.add_argument("--log-base", type=float)
    g.add_argument("--block-order", type=int)
    g.add_argument("--history", type=int)
    g.add_argument("--combine", choices=("any", "all"))
    g.add_argument("--workers", type=int, help="stage-1 worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddos-entropy", description="Entropy-based two-stage DDoS detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("generate", help="write a synthetic trace and window labels")
    _detector_flags(gen)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", help="trace file (.csv or .jsonl)")
    gen.add_argument("--labels", help="labels JSONL (default: <out stem>.labels.jsonl)")
    gen.add_argument("--format", choices=("csv", "jsonl"))
    gen.add_argument("--duration", type=float)
    gen.add_argument("--legit-rate", type=float, help="background records per second")
    gen.add_argument("--sources", type=int)
    gen.add_argument("--destinations", type=int)
    gen.add_argument("--skew", type=float, help="Zipf exponent for source popularity")
    gen.add_argument("--no-attack", action="store_true", default=None)
    gen.add_argument("--attack-start", type=float)
    gen.add_argument("--attack-duration", type=float)
    gen.add_argument("--attack-rate", type=float, help="flood records per second")
    gen.add_argument("--bots", type=int)
    gen.add_argument("--spoof", choices=("fixed-source", "random-source"))
    gen.add_argument("--victim", help="ADDR:PORT")

    cal = sub.add_parser("calibrate", help="derive thresholds from attack-free traffic")
    _detector_flags(cal)
    cal.add_argument("--trace")
    cal.add_argument("--format", choices=("csv", "jsonl"))
    cal.add_argument("--target-fpr", type=float)
    cal.add_argument("--prefix-windows", type=int, help="use only the first N windows of the trace")
    cal.add_argument("--calibrate-th2", action="store_true", default=None,
                     help="also set th2 from baseline dominant-flow entropy rates")
    cal.add_argument("--seed", type=int)
    cal.add_argument("--out", help="thresholds/profile JSON (usable as --config)")

    det = sub.add_parser("detect", help="run the detector over a trace")
    _detector_flags(det)
    det.add_argument("--trace")
    det.add_argument("--format", choices=("csv", "jsonl"))
    det.add_argument("--out", help="verdict JSONL")
    det.add_argument("--alerts-out", help="alert log JSONL")
    det.add_argument("--notify-out", help="client notification file, '-' for stdout")
    det.add_argument("--report-out", help="advisory report JSON")
    det.add_argument("--seed", type=int)

    rep = sub.add_parser("report", help="build the advisory report from verdict JSONL")
    _detector_flags(rep)
    rep.add_argument("--verdicts")
    rep.add_argument("--trace", help="trace file, used only for its identity")
    rep.add_argument("--trace-id")
    rep.add_argument("--out")
    rep.add_argument("--seed", type=int)

    ev = sub.add_parser("evaluate", help="score detector output against window labels")
    _detector_flags(ev)
    ev.add_argument("--trace")
    ev.add_argument("--format", choices=("csv", "jsonl"))
    ev.add_argument("--labels")
    ev.add_argument("--out", help="metrics JSON (default stdout)")
    ev.add_argument("--seed", type=int)
    return parser


def _merge_config_file(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest in ("command", "config"):
                continue
            if hasattr(args, dest) and getattr(args, dest) is None:
                if isinstance(value, list) and dest == "features":
                    value = ",".join(value)
                setattr(args, dest, value)
    for dest, value in DEFAULTS.items():
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)


def _config(args) -> DetectorConfig:
    return config_from_flags(
        {
            "window_seconds": args.window_seconds,
            "features": args.features,
            "th1": args.th1,
            "th2": args.th2,
            "log_base": args.log_base,
            "block_order": args.block_order,
            "history": args.history,
            "combine": args.combine,
        }
    )


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def trace_identity(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return f"{Path(path).name}:{digest.hexdigest()[:16]}"


def _write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    _require(args, "out")
    config = _config(args)
    legit = LegitParams(
        n_sources=args.sources,
        n_destinations=args.destinations,
        records_per_second=args.legit_rate,
        duration=args.duration,
        source_skew=args.skew,
        seed=args.seed,
    )
    attack = None
    if not args.no_attack:
        attack = AttackParams(
            n_bots=args.bots,
            victim=FlowKey.parse(args.victim),
            records_per_second=args.attack_rate,
            start=args.attack_start,
            duration=args.attack_duration,
            spoof_mode=args.spoof,
            seed=(args.seed + 1) % (1 << 64),
        )
    scenario = standard_scenario(
        args.seed, legit=legit, attack=attack, window_duration=config.window_duration, with_attack=attack is not None
    )
    write_trace(scenario.records, args.out, args.format)
    labels_path = args.labels or str(Path(args.out).with_suffix("")) + ".labels.jsonl"
    write_labels(scenario.labels, labels_path)
    log.info("wrote %d records, %d windows", len(scenario.records), len(scenario.labels))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    _require(args, "trace")
    config = _config(args)
    records = read_trace(args.trace, args.format)
    if args.prefix_windows is not None and records:
        epoch = records[0].timestamp
        records = [
            r for r in records
            if math.floor((r.timestamp - epoch) / config.window_duration) < args.prefix_windows
        ]
    profiles = build_baseline(records, config)
    th1 = calibrate_th1(profiles, config, args.target_fpr)
    th2 = calibrate_th2(profiles, config, args.target_fpr) if args.calibrate_th2 else None
    calibrated = config.with_thresholds(th1=th1, th2=th2)
    doc = config_to_flags(calibrated)
    doc["target_fpr"] = args.target_fpr
    doc["baseline"] = {
        "config_digest": calibrated.digest(thresholds=False),
        "windows": len(next(iter(profiles.values())).ne_samples),
        "profiles": profiles_to_json(profiles),
    }
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    _require(args, "trace")
    config = _config(args)
    notify_fh = None
    if args.notify_out == "-":
        notify = lambda line: print(line)  # noqa: E731
    else:
        notify_fh = open(args.notify_out, "w", encoding="utf-8")
        notify = lambda line: notify_fh.write(line + "\n")  # noqa: E731
    sink = AlertLog.open(args.alerts_out) if args.alerts_out else None
    try:
        summary = run_pipeline(iter_trace(args.trace, args.format), config, sink, notify, workers=args.workers)
    finally:
        if sink is not None:
            sink.close()
        if notify_fh is not None:
            notify_fh.close()
    if args.out:
        write_verdicts(summary.verdicts, args.out)
    if args.report_out:
        report = build_advisory_report(summary.verdicts, config, trace_identity(args.trace))
        Path(args.report_out).write_text(report.to_json(), encoding="utf-8")
    log.info("summary: %s", json.dumps(summary.to_dict()))
    return EXIT_ATTACK if summary.attacked else EXIT_OK


def cmd_report(args) -> int:
    _require(args, "verdicts")
    config = _config(args)
    trace_id = args.trace_id or (trace_identity(args.trace) if args.trace else "")
    report = build_advisory_report(read_verdicts(args.verdicts), config, trace_id)
    if args.out in (None, "-"):
        sys.stdout.write(report.to_json())
    else:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require(args, "trace", "labels")
    config = _config(args)
    metrics = evaluate(iter_trace(args.trace, args.format), read_labels(args.labels), config, workers=args.workers)
    _write_json(metrics.to_json(), args.out)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "report": cmd_report,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _merge_config_file(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
    except (DetectorError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
