"""Scoring against ground truth plus the comparison, sweep and timing studies.

Detection quality is measured per (window, source) on pre-fusion alerts:
DA = (TP+TN)/(TP+TN+FP+FN) * 100 and FAR = FP/(FP+TN) * 100. Alarm
reduction is measured separately as aggregated-alarm count vs raw alert
count, so the fusion stage is judged on its own.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from . import pipeline
from .errors import LabelMismatch
from .ingest import parse_packet_log
from .pipeline import DetectionResult, TrainedDetector
from .records import PacketRecord, SourceId

TEST_SETS = ("testA", "testB", "testC", "testD")

LabelKey = tuple[str, str, str]  # (window as %.6f, src_ip, src_mac)


def label_key(window_start: float, source: SourceId) -> LabelKey:
    return (f"{window_start:.6f}", source.ip, source.mac)


def load_labels(path: str | Path) -> dict[LabelKey, bool]:
    labels: dict[LabelKey, bool] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (
                f"{float(row['window_start']):.6f}",
                row["src_ip"],
                row["src_mac"],
            )
            labels[key] = row["is_attack"].strip() == "1"
    return labels


def predictions_from_alerts(
    result: DetectionResult, labels: dict[LabelKey, bool]
) -> dict[LabelKey, bool]:
    """Per (window, source) anomaly flags from raw alerts: a pair is flagged
    when it carries a scored alert or its source was flagged as unmarked."""
    flagged = {
        label_key(a.window_start, a.source)
        for a in result.alerts
        if a.kind.value == "OCSVM"
    }
    unmarked = {(s.ip, s.mac) for s in result.unmarked_sources}
    return {
        key: key in flagged or (key[1], key[2]) in unmarked for key in labels
    }


def predictions_from_scores(
    scores: list[tuple[float, SourceId, float]], labels: dict[LabelKey, bool]
) -> dict[LabelKey, bool]:
    flagged = {label_key(w, s) for w, s, q in scores if q < 0}
    return {key: key in flagged for key in labels}


def confusion(
    predictions: dict[LabelKey, bool], labels: dict[LabelKey, bool]
) -> tuple[int, int, int, int]:
    unknown = set(predictions) - set(labels)
    if unknown:
        raise LabelMismatch(f"{len(unknown)} predicted pairs missing from labels")
    tp = fp = tn = fn = 0
    for key, is_attack in labels.items():
        predicted = predictions.get(key, False)
        if is_attack and predicted:
            tp += 1
        elif is_attack:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def score(
    predictions: dict[LabelKey, bool], labels: dict[LabelKey, bool]
) -> tuple[float, float]:
    """(DA, FAR) percentages."""
    tp, tn, fp, fn = confusion(predictions, labels)
    total = tp + tn + fp + fn
    da = 100.0 * (tp + tn) / total if total else 0.0
    far = 100.0 * fp / (fp + tn) if (fp + tn) else 0.0
    return da, far


# ---------------------------------------------------------------------------
# Suite runs
# ---------------------------------------------------------------------------

@dataclass
class SetOutcome:
    name: str
    baseline_da: float
    baseline_far: float
    it_da: float
    it_far: float
    initial_alerts: int
    aggregated_alarms: int
    result: DetectionResult


@dataclass
class ComparisonReport:
    sets: list[SetOutcome]
    aggregate_baseline_da: float
    aggregate_it_da: float
    aggregate_initial_alerts: int
    aggregate_alarms: int


def _load_suite(suite_dir: str | Path):
    suite_dir = Path(suite_dir)
    data = {}
    for name in TEST_SETS:
        records = parse_packet_log(suite_dir / f"{name}.csv")
        labels = load_labels(suite_dir / f"{name}.labels.csv")
        data[name] = (records, labels)
    return data


def compare_baseline(
    suite_dir: str | Path, detector: TrainedDetector
) -> ComparisonReport:
    """Central-only baseline vs the full pipeline over every test set."""
    sets = []
    agg_labels_n = 0
    agg_base_correct = 0.0
    agg_it_correct = 0.0
    agg_alerts = 0
    agg_alarms = 0
    for name, (records, labels) in _load_suite(suite_dir).items():
        base = predictions_from_scores(pipeline.baseline_scores(records, detector), labels)
        base_da, base_far = score(base, labels)
        result = pipeline.detect(records, detector)
        it = predictions_from_alerts(result, labels)
        it_da, it_far = score(it, labels)
        sets.append(
            SetOutcome(
                name=name,
                baseline_da=base_da,
                baseline_far=base_far,
                it_da=it_da,
                it_far=it_far,
                initial_alerts=len(result.alerts),
                aggregated_alarms=len(result.alarms),
                result=result,
            )
        )
        n = len(labels)
        agg_labels_n += n
        agg_base_correct += base_da * n / 100.0
        agg_it_correct += it_da * n / 100.0
        agg_alerts += len(result.alerts)
        agg_alarms += len(result.alarms)
    return ComparisonReport(
        sets=sets,
        aggregate_baseline_da=100.0 * agg_base_correct / agg_labels_n,
        aggregate_it_da=100.0 * agg_it_correct / agg_labels_n,
        aggregate_initial_alerts=agg_alerts,
        aggregate_alarms=agg_alarms,
    )


def write_comparison_csv(report: ComparisonReport, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["set", "baseline_da", "baseline_far", "it_da", "it_far",
             "initial_alerts", "aggregated_alarms"]
        )
        for s in report.sets:
            writer.writerow(
                [s.name, f"{s.baseline_da:.4f}", f"{s.baseline_far:.4f}",
                 f"{s.it_da:.4f}", f"{s.it_far:.4f}", s.initial_alerts,
                 s.aggregated_alarms]
            )
        writer.writerow(
            ["all", f"{report.aggregate_baseline_da:.4f}", "",
             f"{report.aggregate_it_da:.4f}", "",
             report.aggregate_initial_alerts, report.aggregate_alarms]
        )
    return path


def comparison_markdown(report: ComparisonReport) -> str:
    lines = [
        "| set | baseline DA | baseline FAR | IT DA | IT FAR | alerts | alarms |",
        "|-----|------------:|-------------:|------:|-------:|-------:|-------:|",
    ]
    for s in report.sets:
        lines.append(
            f"| {s.name} | {s.baseline_da:.2f} | {s.baseline_far:.2f} "
            f"| {s.it_da:.2f} | {s.it_far:.2f} | {s.initial_alerts} "
            f"| {s.aggregated_alarms} |"
        )
    lines.append(
        f"| all | {report.aggregate_baseline_da:.2f} |  "
        f"| {report.aggregate_it_da:.2f} |  | {report.aggregate_initial_alerts} "
        f"| {report.aggregate_alarms} |"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepPoint:
    threshold: float
    n_split_models: int
    da: float


def sweep_p_packets(
    values: list[float],
    suite_dir: str | Path,
    detector: TrainedDetector,
    train_records: list[PacketRecord],
) -> list[SweepPoint]:
    """Aggregate DA at each significance threshold; the central model and
    scaler stay fixed, only the split plan is rebuilt."""
    suite = _load_suite(suite_dir)
    points = []
    for threshold in values:
        variant = pipeline.rebuild_splits(detector, train_records, threshold)
        total = 0
        correct = 0.0
        for name, (records, labels) in suite.items():
            result = pipeline.detect(records, variant)
            da, _ = score(predictions_from_alerts(result, labels), labels)
            total += len(labels)
            correct += da * len(labels) / 100.0
        points.append(
            SweepPoint(
                threshold=threshold,
                n_split_models=len(variant.splits),
                da=100.0 * correct / total,
            )
        )
    return points


def write_sweep_csv(points: list[SweepPoint], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "n_split_models", "da"])
        for p in points:
            writer.writerow([f"{p.threshold:.6f}", p.n_split_models, f"{p.da:.4f}"])
    return path


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

@dataclass
class TimingRow:
    name: str
    baseline_s: float
    it_s: float

    @property
    def ratio(self) -> float:
        return self.it_s / self.baseline_s if self.baseline_s > 0 else float("inf")


@dataclass
class TimingReport:
    n_split_models: int
    rows: list[TimingRow]

    @property
    def total_ratio(self) -> float:
        base = sum(r.baseline_s for r in self.rows)
        it = sum(r.it_s for r in self.rows)
        return it / base if base > 0 else float("inf")


def _best_of(fn, k: int = 3) -> float:
    """Minimum wall-clock of k runs with GC paused: preemption spikes and
    collection pauses in small timed regions would otherwise dominate."""
    import gc

    best = float("inf")
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(k):
            start = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - start)
    finally:
        if was_enabled:
            gc.enable()
    return best


def _timed_detection(detector: TrainedDetector, prepared) -> float:
    return _best_of(lambda: pipeline.detect_prepared(prepared, detector))


def _timed_baseline(detector: TrainedDetector, prepared) -> float:
    from .ensemble import score_dataset

    return _best_of(
        lambda: score_dataset(
            detector.central,
            {},
            prepared.scaled,
            (1.0, 0.0),
            matrix=prepared.matrix,
            groups=prepared.groups,
        )
    )


def timing_report(
    suite_dir: str | Path,
    detector: TrainedDetector,
    reps: int = 5,
) -> TimingReport:
    """Median wall-clock of the classification+fusion stage per test set,
    full pipeline vs central-only. Shared pre-processing (parsing, feature
    extraction, per-source tallies) is excluded from the timed region."""
    return timing_study(suite_dir, [detector], reps)[0]


def timing_study(
    suite_dir: str | Path,
    detectors: list[TrainedDetector],
    reps: int = 5,
) -> list[TimingReport]:
    """Timing for several detector configurations at once, interleaved
    repetition by repetition so load drift hits every configuration and
    the baseline symmetrically."""
    per_det_rows: list[list[TimingRow]] = [[] for _ in detectors]
    for name, (records, _labels) in _load_suite(suite_dir).items():
        prepared = [pipeline.prepare_inputs(records, det) for det in detectors]
        _timed_baseline(detectors[0], prepared[0])
        for det, prep in zip(detectors, prepared):
            _timed_detection(det, prep)
        base_times: list[float] = []
        it_times: list[list[float]] = [[] for _ in detectors]
        for _ in range(reps):
            base_times.append(_timed_baseline(detectors[0], prepared[0]))
            for i, (det, prep) in enumerate(zip(detectors, prepared)):
                it_times[i].append(_timed_detection(det, prep))
        base_median = statistics.median(base_times)
        for i in range(len(detectors)):
            per_det_rows[i].append(
                TimingRow(
                    name=name,
                    baseline_s=base_median,
                    it_s=statistics.median(it_times[i]),
                )
            )
    return [
        TimingReport(n_split_models=len(det.splits), rows=rows)
        for det, rows in zip(detectors, per_det_rows)
    ]


def write_timing_csv(reports: list[TimingReport], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_split_models", "set", "baseline_s", "it_s", "ratio"])
        for report in reports:
            for row in report.rows:
                writer.writerow(
                    [report.n_split_models, row.name, f"{row.baseline_s:.6f}",
                     f"{row.it_s:.6f}", f"{row.ratio:.4f}"]
                )
            writer.writerow(
                [report.n_split_models, "all", "", "", f"{report.total_ratio:.4f}"]
            )
    return path
