"""Domain records for the detection pipeline.

All types are immutable after construction and validate their own
invariants, so instances can be shared freely between workers.
"""

from __future__ import annotations

import ipaddress
import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Optional

from .errors import EmptyDataset, MalformedRecord


class Protocol(Enum):
    """Protocol classes observed on the wire.

    Enum order doubles as the deterministic tie-break order for
    protocol rankings.
    """

    TCP = "TCP"
    UDP = "UDP"
    ARP = "ARP"
    ICMP = "ICMP"
    MODBUS = "MODBUS"
    OTHER = "OTHER"


# Canonical serialization order for TCP flags.
TCP_FLAGS = ("SYN", "ACK", "FIN", "RST", "PSH", "URG")
_FLAG_SET = frozenset(TCP_FLAGS)

_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")


@lru_cache(maxsize=4096)
def _valid_ipv4(ip: str) -> bool:
    try:
        ipaddress.IPv4Address(ip)
        return True
    except (ipaddress.AddressValueError, ValueError):
        return False


@lru_cache(maxsize=4096)
def _valid_mac(mac: str) -> bool:
    return bool(_MAC_RE.match(mac))


def normalize_mac(mac: str) -> str:
    return mac.strip().lower()


@dataclass(frozen=True, order=True)
class SourceId:
    """Sender identity; equality is on the (ip, mac) pair so a spoofed
    IP under a foreign MAC is a distinct source."""

    ip: str
    mac: str

    def __post_init__(self):
        if not _valid_ipv4(self.ip):
            raise MalformedRecord(f"invalid IPv4 address {self.ip!r}")
        mac = normalize_mac(self.mac)
        if not _valid_mac(mac):
            raise MalformedRecord(f"invalid MAC address {self.mac!r}")
        object.__setattr__(self, "mac", mac)


@dataclass(frozen=True)
class PacketRecord:
    """One observed packet. tcp_flags must be empty unless protocol is TCP."""

    timestamp: float
    src_ip: str
    src_mac: str
    dst_ip: str
    dst_mac: str
    protocol: Protocol
    tcp_flags: frozenset[str]
    length: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise MalformedRecord(f"negative timestamp {self.timestamp}")
        for ip in (self.src_ip, self.dst_ip):
            if not _valid_ipv4(ip):
                raise MalformedRecord(f"invalid IPv4 address {ip!r}")
        for mac in (self.src_mac, self.dst_mac):
            if not _valid_mac(normalize_mac(mac)):
                raise MalformedRecord(f"invalid MAC address {mac!r}")
        object.__setattr__(self, "src_mac", normalize_mac(self.src_mac))
        object.__setattr__(self, "dst_mac", normalize_mac(self.dst_mac))
        flags = frozenset(self.tcp_flags)
        if not flags <= _FLAG_SET:
            raise MalformedRecord(f"unknown TCP flags {sorted(flags - _FLAG_SET)}")
        if flags and self.protocol is not Protocol.TCP:
            raise MalformedRecord(
                f"tcp_flags set on non-TCP packet ({self.protocol.value})"
            )
        object.__setattr__(self, "tcp_flags", flags)
        if not isinstance(self.length, int) or self.length <= 0:
            raise MalformedRecord(f"invalid packet length {self.length!r}")

    @cached_property
    def source(self) -> SourceId:
        return SourceId(self.src_ip, self.src_mac)


# Windowed feature schema. Index 4 (fifth feature) is the ARP packet count.
FEATURE_NAMES = (
    "pkt_rate",
    "byte_rate",
    "distinct_dst_count",
    "tcp_syn_count",
    "arp_count",
    "tcp_fin_count",
    "udp_fraction",
    "protocol_entropy",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-length descriptor of one time window for one scope.

    source is None for the global (all-traffic) scope.
    """

    window_start: float
    source: Optional[SourceId]
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) != N_FEATURES:
            raise ValueError(
                f"feature vector must have {N_FEATURES} values, got {len(values)}"
            )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", values)


class AlertKind(Enum):
    OCSVM = "OCSVM"
    UNMARKED_SOURCE = "UNMARKED_SOURCE"


@dataclass(frozen=True)
class Alert:
    """One raw anomaly event.

    OCSVM alerts exist only for negative ensemble scores; the weighted
    score never shrinks in magnitude relative to the ensemble score.
    """

    window_start: float
    source: SourceId
    ensemble_score: float
    weighted_score: float
    kind: AlertKind

    def __post_init__(self):
        if self.kind is AlertKind.OCSVM:
            if not self.ensemble_score < 0:
                raise ValueError("OCSVM alerts require a negative ensemble score")
            if abs(self.weighted_score) + 1e-12 < abs(self.ensemble_score):
                raise ValueError("weighted score may not shrink the ensemble score")


class Severity(Enum):
    POSSIBLE = "POSSIBLE"
    MEDIUM = "MEDIUM"
    SEVERE = "SEVERE"


@dataclass(frozen=True)
class AggregatedAlarm:
    """Per-source fused alarm: qa is the accumulated severity mass,
    qb the number of folded alerts."""

    source: SourceId
    qa: float
    qb: int
    severity: Optional[Severity]
    first_seen: float
    last_seen: float

    def __post_init__(self):
        if self.qa < 0:
            raise ValueError("qa must be non-negative")
        if not isinstance(self.qb, int) or self.qb < 1:
            raise ValueError("qb must be a positive integer")
        if self.first_seen > self.last_seen:
            raise ValueError("first_seen must not exceed last_seen")


@dataclass(frozen=True)
class SourceProfile:
    """A source's training footprint: packet count plus its most used
    protocols in descending usage order (at most five)."""

    source: SourceId
    packet_count: int
    protocols: tuple[Protocol, ...]

    def __post_init__(self):
        if self.packet_count < 0:
            raise ValueError("packet_count must be non-negative")
        if len(self.protocols) > 5:
            raise ValueError("at most 5 ranked protocols")
        if len(set(self.protocols)) != len(self.protocols):
            raise ValueError("duplicate protocols in ranking")

    @property
    def protocol_ranks(self) -> list[tuple[Protocol, int]]:
        return [(p, i + 1) for i, p in enumerate(self.protocols)]


def validate_dataset(records: list[PacketRecord]) -> list[PacketRecord]:
    """Return the records sorted by timestamp; records validate their own
    field invariants at construction time."""
    if not records:
        raise EmptyDataset("dataset contains no records")
    return sorted(records, key=lambda r: r.timestamp)
