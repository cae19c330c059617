"""End-to-end wiring: train the model bundle, run detection, persist both.

The scoring unit throughout is the per-source window vector. The central
model is trained on all per-source vectors pooled (the whole traffic
dataset at scoring granularity); each split model is trained on the
slice belonging to one significant source. One scaler, fit on the pooled
training vectors, serves every model so that the central and split
classifiers vote on the identical scaled sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import behavior, ensemble, fusion, ocsvm, splitter
from .errors import ParseError, TooFewSamples
from .ingest import (
    ScalingParams,
    extract_features,
    fit_scaling,
    load_scaling,
    save_scaling,
    scale_all,
)
from .records import AggregatedAlarm, Alert, AlertKind, FeatureVector, PacketRecord, SourceId
from .splitter import SplitPlan


@dataclass(frozen=True)
class DetectorConfig:
    nu: float = 0.001
    kernel: float = 0.01
    kernel_mode: str = "gamma"
    p_packets: float = 0.01
    window_s: float = 2.0
    w_central: float = 0.5
    w_split: float = 0.5
    spearman_floor: float = behavior.SPEARMAN_FLOOR

    @property
    def weights(self) -> tuple[float, float]:
        return (self.w_central, self.w_split)


@dataclass
class TrainedDetector:
    config: DetectorConfig
    scaler: ScalingParams
    central: ocsvm.OcsvmModel
    splits: dict[SourceId, ocsvm.OcsvmModel]
    plan: SplitPlan


@dataclass
class DetectionResult:
    scores: list[tuple[float, SourceId, float]]
    alerts: list[Alert]
    alarms: list[AggregatedAlarm]
    coefficients: dict[SourceId, float] = field(default_factory=dict)

    @property
    def unmarked_sources(self) -> set[SourceId]:
        return {
            a.source for a in self.alerts if a.kind is AlertKind.UNMARKED_SOURCE
        }


def train_detector(records: list[PacketRecord], config: DetectorConfig) -> TrainedDetector:
    vectors = extract_features(records, config.window_s, per_source=True)
    if len(vectors) < 2:
        raise TooFewSamples("training data yields fewer than 2 window vectors")
    scaler = fit_scaling(vectors)
    scaled = scale_all(vectors, scaler)
    central = ocsvm.train(
        scaled, nu=config.nu, kernel=config.kernel, kernel_mode=config.kernel_mode
    )
    plan = splitter.find_significant_sources(records, config.p_packets)
    splits: dict[SourceId, ocsvm.OcsvmModel] = {}
    for profile in plan.significant:
        subset = [v for v in scaled if v.source == profile.source]
        if len(subset) < 2:
            continue  # a significant sender with a single window cannot carry a model
        splits[profile.source] = ocsvm.train(
            subset,
            nu=config.nu,
            kernel=config.kernel,
            kernel_mode=config.kernel_mode,
            scope=profile.source,
        )
    return TrainedDetector(
        config=config, scaler=scaler, central=central, splits=splits, plan=plan
    )


def rebuild_splits(
    detector: TrainedDetector,
    records: list[PacketRecord],
    threshold_fraction: float,
) -> TrainedDetector:
    """Same central model and scaler, new split plan at another threshold."""
    config = replace(detector.config, p_packets=threshold_fraction)
    vectors = extract_features(records, config.window_s, per_source=True)
    scaled = scale_all(vectors, detector.scaler)
    plan = splitter.find_significant_sources(records, threshold_fraction)
    splits: dict[SourceId, ocsvm.OcsvmModel] = {}
    for profile in plan.significant:
        subset = [v for v in scaled if v.source == profile.source]
        if len(subset) < 2:
            continue
        splits[profile.source] = ocsvm.train(
            subset,
            nu=config.nu,
            kernel=config.kernel,
            kernel_mode=config.kernel_mode,
            scope=profile.source,
        )
    return TrainedDetector(
        config=config,
        scaler=detector.scaler,
        central=detector.central,
        splits=splits,
        plan=plan,
    )


def behavioral_coefficients(
    tally: splitter.SourceTally, plan: SplitPlan
) -> dict[SourceId, float]:
    """Spearman correlation of training vs test protocol rankings for every
    significant source observed in the test period."""
    coefficients: dict[SourceId, float] = {}
    for profile in plan.significant:
        counts = tally.protocol_counts.get(profile.source)
        if not counts:
            continue
        test_ranking = behavior.ranking_from_counts(counts)
        coefficients[profile.source] = behavior.spearman(
            list(profile.protocols), test_ranking
        )
    return coefficients


@dataclass
class PreparedInputs:
    """Shared pre-processing products for one test dataset."""

    scaled: list[FeatureVector]
    matrix: "np.ndarray"
    groups: dict[SourceId, "np.ndarray"]
    windows: list[float]
    sources: list[SourceId]
    tally: splitter.SourceTally


def prepare_inputs(
    records: list[PacketRecord], detector: TrainedDetector
) -> PreparedInputs:
    """Scaled per-source window vectors, their value matrix and source
    grouping, and the per-source packet/protocol tally."""
    vectors = extract_features(records, detector.config.window_s, per_source=True)
    scaled = scale_all(vectors, detector.scaler)
    matrix = np.asarray([v.values for v in scaled], dtype=float)
    return PreparedInputs(
        scaled=scaled,
        matrix=matrix,
        groups=ensemble.group_by_source(scaled),
        windows=[v.window_start for v in scaled],
        sources=[v.source for v in scaled],
        tally=splitter.tally_sources(records),
    )


def detect_prepared(
    prepared: PreparedInputs, detector: TrainedDetector
) -> DetectionResult:
    """Classification and fusion on prepared inputs."""
    config = detector.config
    combined = ensemble.combined_scores(
        detector.central,
        detector.splits,
        prepared.matrix,
        prepared.groups,
        config.weights,
    )
    scores = list(zip(prepared.windows, prepared.sources, combined.tolist()))
    negative = [scores[i] for i in np.flatnonzero(combined < 0)]
    coefficients = behavioral_coefficients(prepared.tally, detector.plan)
    alerts = behavior.weight_alerts(negative, coefficients, config.spearman_floor)
    unmarked = splitter.flag_unmarked_from_tally(
        prepared.tally, detector.plan, config.p_packets
    )
    all_alerts = alerts + unmarked
    alarms = fusion.classify_severity(fusion.aggregate(all_alerts))
    return DetectionResult(
        scores=scores, alerts=all_alerts, alarms=alarms, coefficients=coefficients
    )


def detect(records: list[PacketRecord], detector: TrainedDetector) -> DetectionResult:
    """Full pipeline on one test dataset: score, weight, flag, fuse."""
    return detect_prepared(prepare_inputs(records, detector), detector)


def baseline_scores(
    records: list[PacketRecord], detector: TrainedDetector
) -> list[tuple[float, SourceId, float]]:
    """Central-model-only decisions on the same per-source vectors."""
    vectors = extract_features(records, detector.config.window_s, per_source=True)
    scaled = scale_all(vectors, detector.scaler)
    return ensemble.score_dataset(detector.central, {}, scaled, (1.0, 0.0))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_CONFIG_FILE = "detector.cfg"
_CENTRAL_FILE = "central.model"
_SCALER_FILE = "scaler.txt"
_SOURCES_FILE = "sources.txt"


def save_detector(detector: TrainedDetector, model_dir: str | Path) -> Path:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    cfg = detector.config
    lines = [
        f"nu = {cfg.nu!r}",
        f"kernel = {cfg.kernel!r}",
        f"kernel_mode = {cfg.kernel_mode}",
        f"p_packets = {cfg.p_packets!r}",
        f"window_s = {cfg.window_s!r}",
        f"w_central = {cfg.w_central!r}",
        f"w_split = {cfg.w_split!r}",
        f"spearman_floor = {cfg.spearman_floor!r}",
    ]
    (model_dir / _CONFIG_FILE).write_text("\n".join(lines) + "\n")
    ocsvm.save_model(detector.central, model_dir / _CENTRAL_FILE)
    save_scaling(detector.scaler, model_dir / _SCALER_FILE)
    splitter.write_sources_file(detector.plan, model_dir / _SOURCES_FILE)
    for old in model_dir.glob("split_*.model"):
        old.unlink()
    for i, profile in enumerate(detector.plan.significant, start=1):
        model = detector.splits.get(profile.source)
        if model is not None:
            ocsvm.save_model(model, model_dir / f"split_{i:04d}.model")
    return model_dir


def load_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def config_from_mapping(values: dict[str, str]) -> DetectorConfig:
    kwargs = {}
    casts = {
        "nu": float,
        "kernel": float,
        "kernel_mode": str,
        "p_packets": float,
        "window_s": float,
        "w_central": float,
        "w_split": float,
        "spearman_floor": float,
    }
    for key, cast in casts.items():
        if key in values:
            kwargs[key] = cast(values[key])
    return DetectorConfig(**kwargs)


def load_detector(model_dir: str | Path) -> TrainedDetector:
    model_dir = Path(model_dir)
    config = config_from_mapping(load_config_file(model_dir / _CONFIG_FILE))
    central = ocsvm.load_model(model_dir / _CENTRAL_FILE)
    scaler = load_scaling(model_dir / _SCALER_FILE)
    plan = splitter.read_sources_file(model_dir / _SOURCES_FILE)
    splits: dict[SourceId, ocsvm.OcsvmModel] = {}
    for path in sorted(model_dir.glob("split_*.model")):
        model = ocsvm.load_model(path)
        if model.scope is None:
            raise ParseError(f"split model {path} lacks a source scope")
        splits[model.scope] = model
    return TrainedDetector(
        config=config, scaler=scaler, central=central, splits=splits, plan=plan
    )
