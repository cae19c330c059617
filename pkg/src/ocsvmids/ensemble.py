"""Weighted combination of the central and split model decisions.

Both classifiers vote on the same per-source window vector; the combined
score is the weighted sum over available classifiers, normalized by the
sum of available weights, so a source without a split model falls back to
the central decision alone.
"""

from __future__ import annotations

import numpy as np

from .errors import ScalerMismatch
from .ocsvm import OcsvmModel, decide_batch
from .records import FeatureVector, SourceId

DEFAULT_WEIGHTS = (0.5, 0.5)


def ensemble_score(
    central: float,
    split: float | None,
    weights: tuple[float, float] = DEFAULT_WEIGHTS,
) -> float:
    w_central, w_split = weights
    if w_central < 0 or w_split < 0 or (w_central == 0 and w_split == 0):
        raise ValueError("weights must be non-negative and not both zero")
    if split is None:
        return central
    return (w_central * central + w_split * split) / (w_central + w_split)


def group_by_source(vectors: list[FeatureVector]) -> dict[SourceId, np.ndarray]:
    """Index arrays into the per-source vector list, keyed by source."""
    positions: dict[SourceId, list[int]] = {}
    for idx, v in enumerate(vectors):
        if v.source is not None:
            positions.setdefault(v.source, []).append(idx)
    return {src: np.asarray(idxs) for src, idxs in positions.items()}


def combined_scores(
    central: OcsvmModel,
    split_models: dict[SourceId, OcsvmModel],
    X: np.ndarray,
    groups: dict[SourceId, np.ndarray],
    weights: tuple[float, float] = DEFAULT_WEIGHTS,
) -> np.ndarray:
    """Array-level scoring: the weighted central/split combination for every
    row of the scaled value matrix X."""
    w_central, w_split = weights
    if w_central < 0 or w_split < 0 or (w_central == 0 and w_split == 0):
        raise ValueError("weights must be non-negative and not both zero")
    if X.shape[1] != central.support_vectors.shape[1]:
        raise ScalerMismatch(
            f"feature dim {X.shape[1]} does not match model dim "
            f"{central.support_vectors.shape[1]}"
        )
    if X.size and (X.min() < -1e-9 or X.max() > 1.0 + 1e-9):
        raise ScalerMismatch("features outside [0, 1]; scale with the training scaler")
    combined = decide_batch(central, X)
    if split_models:
        for source, idxs in groups.items():
            model = split_models.get(source)
            if model is None:
                continue
            split_scores = decide_batch(model, X[idxs])
            combined[idxs] = (
                w_central * combined[idxs] + w_split * split_scores
            ) / (w_central + w_split)
    return combined


def score_dataset(
    central: OcsvmModel,
    split_models: dict[SourceId, OcsvmModel],
    vectors: list[FeatureVector],
    weights: tuple[float, float] = DEFAULT_WEIGHTS,
    matrix: np.ndarray | None = None,
    groups: dict[SourceId, np.ndarray] | None = None,
) -> list[tuple[float, SourceId, float]]:
    """Combined score for every per-source vector (global-scope vectors are
    ignored). Inputs must already be scaled to [0, 1]. The value matrix and
    source grouping may be passed in precomputed to avoid rebuilding them.
    """
    per_source = [v for v in vectors if v.source is not None]
    if not per_source:
        return []
    X = matrix if matrix is not None else np.asarray(
        [v.values for v in per_source], dtype=float
    )
    if X.shape[0] != len(per_source):
        raise ScalerMismatch(
            f"feature matrix rows {X.shape[0]} do not match {len(per_source)} vectors"
        )
    if groups is None and split_models:
        groups = group_by_source(per_source)
    combined = combined_scores(central, split_models, X, groups or {}, weights)
    windows = [v.window_start for v in per_source]
    sources = [v.source for v in per_source]
    return list(zip(windows, sources, combined.tolist()))
