"""Significant-source planning: which senders get their own split model.

A source is significant when its training packet count reaches
threshold_fraction of all training rows. Significance is measured in
raw packets, not windows. The plan is written to a sources file whose
body lines follow the wire format ``ip mac proto1 ... protoK`` (K <= 5,
descending training usage); plan metadata needed for an exact
round-trip (threshold, row total, per-source counts) rides in the
single ``#`` header line.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError
from .records import (
    Alert,
    AlertKind,
    PacketRecord,
    Protocol,
    SourceId,
    SourceProfile,
)

MAX_RANKED_PROTOCOLS = 5

_PROTO_ORDER = {p: i for i, p in enumerate(Protocol)}


def rank_protocols(counts: Counter, k: int = MAX_RANKED_PROTOCOLS) -> tuple[Protocol, ...]:
    """Top-k protocols by count, descending; ties break on enum order."""
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], _PROTO_ORDER[kv[0]]))
    return tuple(p for p, _ in ordered[:k])


@dataclass(frozen=True)
class SourceTally:
    """Single-pass per-source bookkeeping over one dataset."""

    packet_counts: dict[SourceId, int]
    protocol_counts: dict[SourceId, Counter]
    first_seen: dict[SourceId, float]
    total_rows: int


def tally_sources(records: list[PacketRecord]) -> SourceTally:
    packet_counts: dict[SourceId, int] = {}
    protocol_counts: dict[SourceId, Counter] = {}
    first_seen: dict[SourceId, float] = {}
    for record in records:
        src = record.source
        if src not in packet_counts:
            packet_counts[src] = 0
            protocol_counts[src] = Counter()
            first_seen[src] = record.timestamp
        packet_counts[src] += 1
        protocol_counts[src][record.protocol] += 1
    return SourceTally(
        packet_counts=packet_counts,
        protocol_counts=protocol_counts,
        first_seen=first_seen,
        total_rows=len(records),
    )


@dataclass(frozen=True)
class SplitPlan:
    threshold_fraction: float
    significant: tuple[SourceProfile, ...]
    training_rows: int

    def __post_init__(self):
        if not 0 < self.threshold_fraction <= 1:
            raise ValueError("threshold_fraction must lie in (0, 1]")
        floor = self.threshold_fraction * self.training_rows
        for profile in self.significant:
            if profile.packet_count < floor:
                raise ValueError(
                    f"{profile.source} below significance threshold "
                    f"({profile.packet_count} < {floor})"
                )

    def sources(self) -> set[SourceId]:
        return {p.source for p in self.significant}

    def ranking(self, source: SourceId) -> tuple[Protocol, ...] | None:
        for profile in self.significant:
            if profile.source == source:
                return profile.protocols
        return None


def find_significant_sources(
    records: list[PacketRecord], threshold_fraction: float
) -> SplitPlan:
    """Sources with packet count >= threshold_fraction * total rows, ordered
    by descending packet count (ties by IP string)."""
    if not 0 < threshold_fraction <= 1:
        raise ValueError("threshold_fraction must lie in (0, 1]")
    tally = tally_sources(records)
    floor = threshold_fraction * tally.total_rows
    significant = [
        SourceProfile(
            source=src, packet_count=n, protocols=rank_protocols(tally.protocol_counts[src])
        )
        for src, n in tally.packet_counts.items()
        if n >= floor
    ]
    significant.sort(key=lambda p: (-p.packet_count, p.source.ip, p.source.mac))
    return SplitPlan(
        threshold_fraction=threshold_fraction,
        significant=tuple(significant),
        training_rows=tally.total_rows,
    )


def split_dataset(
    records: list[PacketRecord], plan: SplitPlan
) -> dict[SourceId, list[PacketRecord]]:
    """Disjoint per-source subsets for the plan's significant sources;
    traffic from other senders is covered by the central model only."""
    wanted = plan.sources()
    subsets: dict[SourceId, list[PacketRecord]] = {src: [] for src in wanted}
    for record in records:
        src = record.source
        if src in wanted:
            subsets[src].append(record)
    return subsets


def flag_unmarked_from_tally(
    tally: SourceTally, plan: SplitPlan, threshold_fraction: float
) -> list[Alert]:
    floor = threshold_fraction * tally.total_rows
    known = plan.sources()
    alerts = [
        Alert(
            window_start=tally.first_seen[src],
            source=src,
            ensemble_score=0.0,
            weighted_score=0.0,
            kind=AlertKind.UNMARKED_SOURCE,
        )
        for src, n in tally.packet_counts.items()
        if src not in known and n >= floor
    ]
    alerts.sort(key=lambda a: (a.source.ip, a.source.mac))
    return alerts


def flag_unmarked_sources(
    records: list[PacketRecord], plan: SplitPlan, threshold_fraction: float
) -> list[Alert]:
    """Medium-severity alerts for test-period sources that show big activity
    without having been marked significant during training.

    These bypass ensemble and behavioral scoring; fusion keeps them MEDIUM.
    """
    return flag_unmarked_from_tally(tally_sources(records), plan, threshold_fraction)


def write_sources_file(plan: SplitPlan, path: str | Path) -> Path:
    path = Path(path)
    counts = ",".join(str(p.packet_count) for p in plan.significant)
    lines = [
        f"# p_packets={plan.threshold_fraction!r} rows={plan.training_rows} counts={counts}"
    ]
    for profile in plan.significant:
        protos = " ".join(p.value for p in profile.protocols)
        lines.append(f"{profile.source.ip} {profile.source.mac} {protos}".rstrip())
    path.write_text("\n".join(lines) + "\n")
    return path


def read_sources_file(path: str | Path) -> SplitPlan:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ParseError(f"missing header line in sources file {path}")
    header = dict(
        tok.split("=", 1) for tok in lines[0].lstrip("#").split() if "=" in tok
    )
    try:
        threshold = float(header["p_packets"])
        rows = int(header["rows"])
        counts = [int(c) for c in header["counts"].split(",") if c]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"corrupt sources-file header in {path}: {exc}") from exc
    body = lines[1:]
    if len(counts) != len(body):
        raise ParseError(
            f"sources file {path}: {len(body)} source lines but {len(counts)} counts"
        )
    profiles = []
    for line, count in zip(body, counts):
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"bad sources line {line!r}")
        try:
            protos = tuple(Protocol(tok.upper()) for tok in parts[2:])
        except ValueError as exc:
            raise ParseError(f"bad protocol token in {line!r}") from exc
        profiles.append(
            SourceProfile(
                source=SourceId(parts[0], parts[1]),
                packet_count=count,
                protocols=protos,
            )
        )
    return SplitPlan(
        threshold_fraction=threshold,
        significant=tuple(profiles),
        training_rows=rows,
    )
