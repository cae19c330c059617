"""Alert fusion: per-source aggregation and two-vote severity classing.

Aggregation folds every OCSVM alert from one source into a single alarm
carrying qa (sum of the positive magnitudes of the weighted scores) and
qb (alert count). Two k-means(k=2) runs, one over the qa values and one
over the qb values, then vote independently; an alarm in the
higher-centroid cluster of both runs is SEVERE, of exactly one MEDIUM,
of neither POSSIBLE. Alarms that arrive pre-labeled (unmarked-source
flags) keep their MEDIUM label and stay out of the clustering.
"""

from __future__ import annotations

import csv
from pathlib import Path

from dataclasses import replace

from .errors import EmptyInput
from .records import AggregatedAlarm, Alert, AlertKind, Severity, SourceId

KMEANS_MAX_ITER = 100


def aggregate(alerts: list[Alert]) -> list[AggregatedAlarm]:
    """One severity-unset alarm per alerted source; unmarked-source alerts
    pass through as separate alarms pre-labeled MEDIUM with qa=0, qb=1."""
    grouped: dict[SourceId, list[Alert]] = {}
    passthrough = []
    for alert in alerts:
        if alert.kind is AlertKind.UNMARKED_SOURCE:
            passthrough.append(alert)
        else:
            grouped.setdefault(alert.source, []).append(alert)
    alarms = []
    for source in sorted(grouped, key=lambda s: (s.ip, s.mac)):
        bunch = grouped[source]
        alarms.append(
            AggregatedAlarm(
                source=source,
                qa=sum(max(0.0, -a.weighted_score) for a in bunch),
                qb=len(bunch),
                severity=None,
                first_seen=min(a.window_start for a in bunch),
                last_seen=max(a.window_start for a in bunch),
            )
        )
    for alert in passthrough:
        alarms.append(
            AggregatedAlarm(
                source=alert.source,
                qa=0.0,
                qb=1,
                severity=Severity.MEDIUM,
                first_seen=alert.window_start,
                last_seen=alert.window_start,
            )
        )
    return alarms


def kmeans_1d(
    values: list[float], k: int = 2, max_iter: int = KMEANS_MAX_ITER
) -> tuple[list[int], list[float]]:
    """Lloyd iterations on 1-D data with centroids seeded at min and max.

    Returns (assignments, centroids) with centroids sorted ascending.
    Fewer than k distinct values collapse to a single cluster with the
    centroid duplicated. The within-cluster squared error never increases
    across iterations (asserted).
    """
    if k != 2:
        raise ValueError("only k=2 is supported")
    if not values:
        raise EmptyInput("kmeans_1d needs at least one value")
    vals = [float(v) for v in values]
    lo, hi = min(vals), max(vals)
    if lo == hi:
        return [0] * len(vals), [lo, lo]
    centroids = [lo, hi]
    assignment = [-1] * len(vals)
    last_sse = None
    for _ in range(max_iter):
        new_assignment = [
            0 if abs(v - centroids[0]) <= abs(v - centroids[1]) else 1 for v in vals
        ]
        sse = sum((v - centroids[c]) ** 2 for v, c in zip(vals, new_assignment))
        if last_sse is not None:
            assert sse <= last_sse + 1e-12, "SSE increased during Lloyd iteration"
        last_sse = sse
        if new_assignment == assignment:
            break
        assignment = new_assignment
        for c in (0, 1):
            members = [v for v, a in zip(vals, assignment) if a == c]
            if members:
                centroids[c] = sum(members) / len(members)
        # Min/max seeding keeps the extremes attached to their own side,
        # so neither cluster can empty out and the order never flips.
        assert centroids[0] <= centroids[1]
    return assignment, centroids


def _high_cluster_votes(values: list[float]) -> list[bool]:
    assignment, centroids = kmeans_1d(values)
    if centroids[0] == centroids[1]:
        return [False] * len(values)
    return [a == 1 for a in assignment]


def classify_severity(alarms: list[AggregatedAlarm]) -> list[AggregatedAlarm]:
    """Set severity on every alarm; pre-labeled alarms are untouched."""
    out: list[AggregatedAlarm | None] = list(alarms)
    open_idx = [i for i, a in enumerate(alarms) if a.severity is None]
    if not open_idx:
        return list(alarms)
    if len(open_idx) == 1:
        i = open_idx[0]
        a = alarms[i]
        severity = Severity.SEVERE if a.qa > 0 else Severity.POSSIBLE
        out[i] = replace(a, severity=severity)
        return out  # type: ignore[return-value]
    qa_votes = _high_cluster_votes([alarms[i].qa for i in open_idx])
    qb_votes = _high_cluster_votes([float(alarms[i].qb) for i in open_idx])
    for pos, i in enumerate(open_idx):
        votes = int(qa_votes[pos]) + int(qb_votes[pos])
        severity = (
            Severity.SEVERE if votes == 2 else Severity.MEDIUM if votes == 1 else Severity.POSSIBLE
        )
        out[i] = replace(alarms[i], severity=severity)
    return out  # type: ignore[return-value]


ALARM_REPORT_HEADER = ["src_ip", "src_mac", "qa", "qb", "severity", "first_seen", "last_seen"]


def write_alarm_report(alarms: list[AggregatedAlarm], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ALARM_REPORT_HEADER)
        for a in alarms:
            writer.writerow(
                [
                    a.source.ip,
                    a.source.mac,
                    f"{a.qa:.6f}",
                    a.qb,
                    a.severity.value if a.severity else "",
                    f"{a.first_seen:.6f}",
                    f"{a.last_seen:.6f}",
                ]
            )
    return path
