"""Command-line entry point.

Subcommands: simulate, train, detect, eval, sweep. Exit codes: 0 success,
1 usage error, 2 domain error, 3 I/O error. Option precedence is
command-line flags, then --config file entries, then built-in defaults.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluate, pipeline, simgen
from .errors import PipelineError
from .fusion import write_alarm_report
from .idmef import IdmefEmitter
from .ingest import extract_features, parse_packet_log, write_feature_dump
from .pipeline import DetectorConfig, load_config_file
from .records import Severity

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocsvmids", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic traffic")
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", type=Path, help="scenario config file")
    src.add_argument("--standard-suite", action="store_true",
                     help="emit the train + testA..D suite")
    p_sim.add_argument("--seed", type=int, default=42)
    p_sim.add_argument("--out", type=Path, required=True)
    p_sim.add_argument("--window", type=float, default=2.0,
                       help="window length for label sidecars (seconds)")

    p_train = sub.add_parser("train", help="train central and split models")
    p_train.add_argument("--train", dest="train_file", type=Path, required=True)
    p_train.add_argument("--model-dir", type=Path, required=True)
    p_train.add_argument("--config", type=Path, help="flat key=value config file")
    p_train.add_argument("--nu", type=float)
    p_train.add_argument("--kernel", type=float)
    p_train.add_argument("--kernel-param", choices=["gamma", "sigma"])
    p_train.add_argument("--p-packets", type=float)
    p_train.add_argument("--window", type=float)
    p_train.add_argument("--w-central", type=float)
    p_train.add_argument("--w-split", type=float)
    p_train.add_argument("--dump-features", type=Path,
                         help="write the per-source training features as CSV")

    p_det = sub.add_parser("detect", help="run detection on a packet log")
    p_det.add_argument("--test", dest="test_file", type=Path, required=True)
    p_det.add_argument("--model-dir", type=Path, required=True)
    p_det.add_argument("--idmef-out", type=Path, help="directory for alert XML files")
    p_det.add_argument("--report", type=Path, help="alarm report CSV path")
    p_det.add_argument("--analyzer-id", default="ocsvmids")
    p_det.add_argument("--epoch", type=float, default=0.0,
                       help="wall-clock epoch for capture-relative times")

    p_eval = sub.add_parser("eval", help="baseline comparison over a suite")
    p_eval.add_argument("--suite", type=Path, required=True)
    p_eval.add_argument("--model-dir", type=Path, required=True)
    p_eval.add_argument("--out", type=Path, required=True)
    p_eval.add_argument("--timing-reps", type=int, default=0,
                        help="also measure detection timing with N repetitions")
    p_eval.add_argument("--forced-threshold", type=float, default=0.005,
                        help="significance threshold for the large-split timing run")

    p_sweep = sub.add_parser("sweep", help="threshold sweep over a suite")
    p_sweep.add_argument("--suite", type=Path, required=True)
    p_sweep.add_argument("--model-dir", type=Path, required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated significance thresholds")
    p_sweep.add_argument("--out", type=Path, required=True,
                         help="curve CSV path")
    return parser


def _merged_config(args) -> DetectorConfig:
    file_values = load_config_file(args.config) if args.config else {}
    merged = pipeline.config_from_mapping(file_values)
    overrides = {
        "nu": args.nu,
        "kernel": args.kernel,
        "kernel_mode": args.kernel_param,
        "p_packets": args.p_packets,
        "window_s": args.window,
        "w_central": args.w_central,
        "w_split": args.w_split,
    }
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    if not kwargs:
        return merged
    from dataclasses import replace

    return replace(merged, **kwargs)


def cmd_simulate(args) -> int:
    if args.standard_suite:
        written = simgen.standard_suite(args.seed, args.out, args.window)
    else:
        written = simgen.run_scenario_file(args.spec, args.out, args.window)
    for name in sorted(written):
        print(f"wrote {written[name]}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _merged_config(args)
    records = parse_packet_log(args.train_file)
    detector = pipeline.train_detector(records, config)
    pipeline.save_detector(detector, args.model_dir)
    if args.dump_features:
        vectors = extract_features(records, config.window_s, per_source=True)
        write_feature_dump(vectors, args.dump_features)
    print(f"trained central model on {detector.central.n_train} window vectors")
    print(f"split models: {len(detector.splits)}")
    return EXIT_OK


def cmd_detect(args) -> int:
    try:
        detector = pipeline.load_detector(args.model_dir)
    except OSError as exc:
        raise PipelineError(f"cannot load models from {args.model_dir}: {exc}") from exc
    records = parse_packet_log(args.test_file)
    result = pipeline.detect(records, detector)
    if args.report:
        write_alarm_report(result.alarms, args.report)
    if args.idmef_out:
        args.idmef_out.mkdir(parents=True, exist_ok=True)
        emitter = IdmefEmitter(args.idmef_out, args.analyzer_id, args.epoch)
        emitter.emit_all(result.alarms)
    by_severity = {s: 0 for s in Severity}
    for alarm in result.alarms:
        by_severity[alarm.severity] += 1
    print(f"raw alerts: {len(result.alerts)}")
    print(f"aggregated alarms: {len(result.alarms)}")
    for severity in Severity:
        print(f"  {severity.value}: {by_severity[severity]}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        detector = pipeline.load_detector(args.model_dir)
    except OSError as exc:
        raise PipelineError(f"cannot load models from {args.model_dir}: {exc}") from exc
    args.out.mkdir(parents=True, exist_ok=True)
    report = evaluate.compare_baseline(args.suite, detector)
    evaluate.write_comparison_csv(report, args.out / "comparison.csv")
    markdown = evaluate.comparison_markdown(report)
    (args.out / "comparison.md").write_text(markdown)
    print(markdown, end="")
    if args.timing_reps > 0:
        train_records = parse_packet_log(args.suite / "train.csv")
        forced = pipeline.rebuild_splits(detector, train_records, args.forced_threshold)
        default_timing, forced_timing = evaluate.timing_study(
            args.suite, [detector, forced], args.timing_reps
        )
        evaluate.write_timing_csv([default_timing, forced_timing], args.out / "timing.csv")
        print(f"timing ratio at {default_timing.n_split_models} splits: "
              f"{default_timing.total_ratio:.3f}")
        print(f"timing ratio at {forced_timing.n_split_models} splits: "
              f"{forced_timing.total_ratio:.3f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        detector = pipeline.load_detector(args.model_dir)
    except OSError as exc:
        raise PipelineError(f"cannot load models from {args.model_dir}: {exc}") from exc
    try:
        values = [float(tok) for tok in args.values.split(",") if tok.strip()]
    except ValueError as exc:
        raise _UsageError(f"bad --values list: {exc}") from exc
    if not values:
        raise _UsageError("--values must name at least one threshold")
    train_records = parse_packet_log(args.suite / "train.csv")
    points = evaluate.sweep_p_packets(values, args.suite, detector, train_records)
    evaluate.write_sweep_csv(points, args.out)
    for p in points:
        print(f"threshold {p.threshold:g}: {p.n_split_models} split models, "
              f"DA {p.da:.2f}%")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
