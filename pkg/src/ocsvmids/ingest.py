"""Packet-log parsing, tumbling-window feature extraction, and min/max scaling.

The packet-log wire format is CSV with header
``timestamp,src_ip,src_mac,dst_ip,dst_mac,protocol,tcp_flags,length``
where tcp_flags is a ``|``-joined token list (empty for none).
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyDataset, MalformedRecord, ParseError
from .records import (
    FEATURE_NAMES,
    N_FEATURES,
    TCP_FLAGS,
    FeatureVector,
    PacketRecord,
    Protocol,
    SourceId,
    validate_dataset,
)

PACKET_LOG_HEADER = [
    "timestamp",
    "src_ip",
    "src_mac",
    "dst_ip",
    "dst_mac",
    "protocol",
    "tcp_flags",
    "length",
]


def flags_to_str(flags: frozenset[str]) -> str:
    return "|".join(f for f in TCP_FLAGS if f in flags)


def str_to_flags(text: str) -> frozenset[str]:
    text = text.strip()
    if not text:
        return frozenset()
    return frozenset(tok.strip() for tok in text.split("|") if tok.strip())


def record_to_row(record: PacketRecord) -> list[str]:
    # repr keeps the exact float so parse(serialize(r)) == r and window
    # boundaries cannot shift between in-memory and re-parsed records.
    return [
        repr(record.timestamp),
        record.src_ip,
        record.src_mac,
        record.dst_ip,
        record.dst_mac,
        record.protocol.value,
        flags_to_str(record.tcp_flags),
        str(record.length),
    ]


def row_to_record(row: list[str], line: int | None = None) -> PacketRecord:
    if len(row) != len(PACKET_LOG_HEADER):
        raise MalformedRecord(f"expected {len(PACKET_LOG_HEADER)} fields, got {len(row)}", line)
    try:
        timestamp = float(row[0])
        protocol = Protocol(row[5].strip().upper())
        length = int(row[7])
    except ValueError as exc:
        raise MalformedRecord(str(exc), line) from exc
    try:
        return PacketRecord(
            timestamp=timestamp,
            src_ip=row[1].strip(),
            src_mac=row[2].strip(),
            dst_ip=row[3].strip(),
            dst_mac=row[4].strip(),
            protocol=protocol,
            tcp_flags=str_to_flags(row[6]),
            length=length,
        )
    except MalformedRecord as exc:
        raise MalformedRecord(str(exc), line) from exc


def parse_packet_log(path: str | Path) -> list[PacketRecord]:
    """Parse and validate a packet-log CSV; returns time-sorted records."""
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PACKET_LOG_HEADER:
            raise MalformedRecord(f"bad or missing packet-log header in {path}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            records.append(row_to_record(row, line=lineno))
    if not records:
        raise EmptyDataset(f"no data rows in {path}")
    return validate_dataset(records)


def write_packet_log(records: list[PacketRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PACKET_LOG_HEADER)
        for record in records:
            writer.writerow(record_to_row(record))
    return path


def window_start(timestamp: float, window_s: float) -> float:
    return math.floor(timestamp / window_s) * window_s


def _window_features(packets: list[PacketRecord], window_s: float) -> tuple[float, ...]:
    n = len(packets)
    proto_counts = Counter(p.protocol for p in packets)
    entropy = 0.0
    for count in proto_counts.values():
        p = count / n
        entropy -= p * math.log2(p)
    return (
        n / window_s,
        sum(p.length for p in packets) / window_s,
        float(len({p.dst_ip for p in packets})),
        float(sum(1 for p in packets if "SYN" in p.tcp_flags)),
        float(proto_counts.get(Protocol.ARP, 0)),
        float(sum(1 for p in packets if "FIN" in p.tcp_flags)),
        proto_counts.get(Protocol.UDP, 0) / n,
        entropy,
    )


def extract_features(
    records: list[PacketRecord], window_s: float, per_source: bool = False
) -> list[FeatureVector]:
    """Build one FeatureVector per non-empty tumbling window.

    With per_source=True the grouping key is (window, sender); empty
    windows yield no vector so idle sources contribute nothing.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    if not records:
        raise EmptyDataset("cannot extract features from an empty dataset")
    groups: dict[tuple, list[PacketRecord]] = {}
    for record in records:
        w = window_start(record.timestamp, window_s)
        key = (w, record.source) if per_source else (w, None)
        groups.setdefault(key, []).append(record)
    vectors = [
        FeatureVector(window_start=w, source=src, values=_window_features(pkts, window_s))
        for (w, src), pkts in groups.items()
    ]
    vectors.sort(key=lambda v: (v.window_start, v.source or SourceId("0.0.0.0", "00:00:00:00:00:00")))
    return vectors


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature (min, max) learned on training data; constant features
    (max == min) scale to 0."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if len(self.mins) != N_FEATURES or len(self.maxs) != N_FEATURES:
            raise ValueError(f"scaling params must cover {N_FEATURES} features")
        if any(mx < mn for mn, mx in zip(self.mins, self.maxs)):
            raise ValueError("max must be >= min for every feature")


def fit_scaling(train: list[FeatureVector]) -> ScalingParams:
    if not train:
        raise EmptyDataset("cannot fit scaling on an empty training set")
    mins = list(train[0].values)
    maxs = list(train[0].values)
    for v in train[1:]:
        for i, x in enumerate(v.values):
            if x < mins[i]:
                mins[i] = x
            if x > maxs[i]:
                maxs[i] = x
    return ScalingParams(mins=tuple(mins), maxs=tuple(maxs))


def apply_scaling(v: FeatureVector, params: ScalingParams) -> FeatureVector:
    """Map each value to (x - min)/(max - min), clamped to [0, 1]; values
    outside the training range clamp rather than extrapolate."""
    scaled = []
    for x, mn, mx in zip(v.values, params.mins, params.maxs):
        if mx == mn:
            scaled.append(0.0)
        else:
            scaled.append(min(1.0, max(0.0, (x - mn) / (mx - mn))))
    return FeatureVector(window_start=v.window_start, source=v.source, values=tuple(scaled))


def scale_all(vectors: list[FeatureVector], params: ScalingParams) -> list[FeatureVector]:
    return [apply_scaling(v, params) for v in vectors]


def save_scaling(params: ScalingParams, path: str | Path) -> Path:
    path = Path(path)
    lines = ["SCALER v1"]
    for name, mn, mx in zip(FEATURE_NAMES, params.mins, params.maxs):
        lines.append(f"{name} {mn!r} {mx!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_scaling(path: str | Path) -> ScalingParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "SCALER v1":
        raise ParseError(f"unrecognized scaler file {path}")
    mins, maxs = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"bad scaler line {line!r}")
        mins.append(float(parts[1]))
        maxs.append(float(parts[2]))
    return ScalingParams(mins=tuple(mins), maxs=tuple(maxs))


def write_feature_dump(vectors: list[FeatureVector], path: str | Path) -> Path:
    """Debug dump: window_start,src_ip,src_mac,f1..f8 (blank source = global)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start", "src_ip", "src_mac", *FEATURE_NAMES])
        for v in vectors:
            ip = v.source.ip if v.source else ""
            mac = v.source.mac if v.source else ""
            writer.writerow([f"{v.window_start:.6f}", ip, mac, *[repr(x) for x in v.values]])
    return path
