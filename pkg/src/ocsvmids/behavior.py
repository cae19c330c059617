"""Behavioral drift weighting.

Each significant source's protocol-usage ranking from training is
compared against its test-period ranking with Spearman's rank
correlation; alerts from sources whose behavior drifted (low
correlation) get their scores amplified.
"""

from __future__ import annotations

from collections import Counter

from .errors import SourceNotFound
from .records import Alert, AlertKind, PacketRecord, Protocol, SourceId
from .splitter import MAX_RANKED_PROTOCOLS, rank_protocols

# Correlation values are clamped to [SPEARMAN_FLOOR, 1] before weighting so
# the amplification stays finite and sign-stable for anti-correlated or
# unknown sources.
SPEARMAN_FLOOR = 0.05


def ranking_from_counts(counts: Counter, k: int = MAX_RANKED_PROTOCOLS) -> list[Protocol]:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not counts:
        raise SourceNotFound("source sent no packets")
    return list(rank_protocols(counts, k))


def protocol_ranking(
    records: list[PacketRecord], source: SourceId, k: int = MAX_RANKED_PROTOCOLS
) -> list[Protocol]:
    """Top-k protocols used by one source, descending by packet count."""
    if k < 1:
        raise ValueError("k must be at least 1")
    counts = Counter(r.protocol for r in records if r.source == source)
    if not counts:
        raise SourceNotFound(f"{source.ip}/{source.mac} sent no packets")
    return list(rank_protocols(counts, k))


def spearman(train_ranking: list, test_ranking: list) -> float:
    """Rank correlation of two ordered lists, aligned on their union.

    An item absent from one list takes rank len(list)+1 there. A union of
    one item returns 1.0 by convention. Output lies in [-1, 1].
    """
    train_rank = {item: i + 1 for i, item in enumerate(train_ranking)}
    test_rank = {item: i + 1 for i, item in enumerate(test_ranking)}
    union = list(dict.fromkeys(list(train_ranking) + list(test_ranking)))
    n = len(union)
    if n == 0:
        return 1.0
    if n == 1:
        return 1.0
    missing_train = len(train_ranking) + 1
    missing_test = len(test_ranking) + 1
    d2 = 0
    for item in union:
        d = train_rank.get(item, missing_train) - test_rank.get(item, missing_test)
        d2 += d * d
    return 1.0 - (6.0 * d2) / (n * (n * n - 1))


def weight_alerts(
    scores: list[tuple[float, SourceId, float]],
    coefficients: dict[SourceId, float],
    floor: float = SPEARMAN_FLOOR,
) -> list[Alert]:
    """Turn negative ensemble scores into alerts with drift-amplified scores.

    weighted = score / clamp(p_j, floor, 1); sources without a coefficient
    (unseen during training) get maximal amplification via p_j = floor.
    Non-negative scores produce nothing.
    """
    alerts = []
    for window, source, score in scores:
        if score >= 0:
            continue
        p = coefficients.get(source, floor)
        p = min(1.0, max(floor, p))
        alerts.append(
            Alert(
                window_start=window,
                source=source,
                ensemble_score=score,
                weighted_score=score / p,
                kind=AlertKind.OCSVM,
            )
        )
    return alerts
