"""Deterministic synthetic SCADA traffic generation.

A scenario describes a small plant network (HMI, PLCs, a monitoring
switch, workstations, field sensors) plus optional attack injections.
Background traffic mixes strictly periodic MODBUS polling (with
responses), periodic TCP keepalive probes from the monitoring node, and
Poisson chatter per link. Attack packets are evenly spaced (no jitter)
so their counts are exact. The same seed always reproduces the same
byte-identical packet log.

Three attack kinds are supported:

* NETWORK_SCAN: low-rate TCP FIN probes walking sequential hosts, meant
  to blend with the background keepalive noise.
* ARP_SPOOF_MITM: forged ARP replies binding the attacker's MAC to the
  victim's IP, plus relayed traffic; both appear as one novel
  (victim_ip, attacker_mac) source.
* SYN_FLOOD: high-rate TCP SYN stream at a PLC.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import InvalidSpec, ParseError
from .ingest import window_start, write_packet_log
from .records import PacketRecord, Protocol, SourceId

BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"

# Flag mix for TCP data packets inside a chatter session.
_TCP_DATA_FLAGS = (frozenset({"ACK"}), frozenset({"PSH", "ACK"}))
_TCP_DATA_WEIGHTS = (0.75, 0.25)

LINK_STYLES = ("poisson", "periodic", "session")


class Role(Enum):
    HMI = "HMI"
    PLC = "PLC"
    SWITCH = "SWITCH"
    WORKSTATION = "WORKSTATION"
    INTRUDER = "INTRUDER"


class AttackKind(Enum):
    NETWORK_SCAN = "NETWORK_SCAN"
    ARP_SPOOF_MITM = "ARP_SPOOF_MITM"
    SYN_FLOOD = "SYN_FLOOD"


@dataclass(frozen=True)
class Node:
    name: str
    role: Role
    source: SourceId


@dataclass(frozen=True)
class Link:
    """One background traffic stream src -> dst.

    MODBUS links always poll periodically and generate paired responses.
    Styles: "poisson" draws exponential inter-arrivals at rate_pps;
    "periodic" spaces packets evenly (fixed flags for TCP); "session"
    treats rate_pps as TCP connections per second, each one SYN, a few
    data packets, one FIN|ACK close, so per-window SYN and FIN counts
    stay bounded.
    """

    src: str
    dst: str
    protocol: Protocol
    rate_pps: float
    flags: frozenset[str] = frozenset()
    style: str = "poisson"

    def __post_init__(self):
        if self.style not in LINK_STYLES:
            raise InvalidSpec(f"unknown link style {self.style!r}")


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    attacker: SourceId
    target: SourceId
    start_s: float
    end_s: float
    intensity: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise InvalidSpec("attack start must precede its end")
        if self.intensity <= 0:
            raise InvalidSpec("attack intensity must be positive")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    duration_s: float
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    attacks: tuple[AttackSpec, ...] = ()

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidSpec("duration must be positive")
        roles = [n.role for n in self.nodes]
        if Role.HMI not in roles or Role.PLC not in roles:
            raise InvalidSpec("topology needs at least one HMI and one PLC")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise InvalidSpec("duplicate node names")
        by_name = {n.name: n for n in self.nodes}
        for link in self.links:
            if link.src not in by_name or link.dst not in by_name:
                raise InvalidSpec(f"link references unknown node: {link.src}->{link.dst}")
            if link.rate_pps <= 0:
                raise InvalidSpec("link rate must be positive")
        for attack in self.attacks:
            if attack.start_s < 0 or attack.end_s > self.duration_s:
                raise InvalidSpec("attack interval must lie within the scenario duration")

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise InvalidSpec(f"unknown node {name!r}")

    @property
    def hmi(self) -> Node:
        return next(n for n in self.nodes if n.role is Role.HMI)


def _packet(ts, src: SourceId, dst_ip, dst_mac, protocol, flags, length) -> PacketRecord:
    return PacketRecord(
        timestamp=ts,
        src_ip=src.ip,
        src_mac=src.mac,
        dst_ip=dst_ip,
        dst_mac=dst_mac,
        protocol=protocol,
        tcp_flags=frozenset(flags),
        length=length,
    )


def _gen_session(link: Link, src: SourceId, dst: SourceId, duration: float,
                 rng: random.Random, out: list):
    period = 1.0 / link.rate_pps
    t = rng.uniform(0, period)
    while t < duration:
        out.append((t, _packet(t, src, dst.ip, dst.mac, Protocol.TCP, ("SYN",), 60)))
        n_data = rng.randint(3, 8)
        step = 0.12
        for i in range(1, n_data + 1):
            td = t + i * step
            if td >= duration:
                break
            flags = rng.choices(_TCP_DATA_FLAGS, _TCP_DATA_WEIGHTS)[0]
            out.append((td, _packet(td, src, dst.ip, dst.mac, Protocol.TCP, flags,
                                    rng.randint(60, 180))))
        tf = t + (n_data + 1) * step
        if tf < duration:
            out.append((tf, _packet(tf, src, dst.ip, dst.mac, Protocol.TCP,
                                    ("FIN", "ACK"), 60)))
        t += period * rng.uniform(0.9, 1.1)


def _gen_link(link: Link, spec: ScenarioSpec, rng: random.Random, out: list):
    src = spec.node(link.src).source
    dst = spec.node(link.dst).source
    duration = spec.duration_s
    if link.protocol is Protocol.MODBUS:
        period = 1.0 / link.rate_pps
        t = rng.uniform(0, period)
        while t < duration:
            out.append((t, _packet(t, src, dst.ip, dst.mac, Protocol.MODBUS, (), rng.randint(62, 66))))
            tr = t + 0.002
            if tr < duration:
                out.append((tr, _packet(tr, dst, src.ip, src.mac, Protocol.MODBUS, (), rng.randint(62, 70))))
            t += period
        return
    if link.style == "session":
        if link.protocol is not Protocol.TCP:
            raise InvalidSpec("session links must carry TCP")
        _gen_session(link, src, dst, duration, rng, out)
        return
    if link.style == "periodic":
        period = 1.0 / link.rate_pps
        t = rng.uniform(0, period)
        while t < duration:
            dst_mac = BROADCAST_MAC if link.protocol is Protocol.ARP else dst.mac
            length = 98 if link.protocol is Protocol.ICMP else 60
            out.append((t, _packet(t, src, dst.ip, dst_mac, link.protocol, link.flags, length)))
            t += period
        return
    t = 0.0
    while True:
        t += rng.expovariate(link.rate_pps)
        if t >= duration:
            break
        if link.protocol is Protocol.TCP:
            flags = link.flags or rng.choices(_TCP_DATA_FLAGS, _TCP_DATA_WEIGHTS)[0]
            length = rng.randint(60, 180)
            out.append((t, _packet(t, src, dst.ip, dst.mac, Protocol.TCP, flags, length)))
        elif link.protocol is Protocol.UDP:
            out.append((t, _packet(t, src, dst.ip, dst.mac, Protocol.UDP, (), rng.randint(60, 120))))
        elif link.protocol is Protocol.ICMP:
            out.append((t, _packet(t, src, dst.ip, dst.mac, Protocol.ICMP, (), 98)))
        elif link.protocol is Protocol.ARP:
            out.append((t, _packet(t, src, dst.ip, BROADCAST_MAC, Protocol.ARP, (), 60)))
        else:
            out.append((t, _packet(t, src, dst.ip, dst.mac, link.protocol, (), rng.randint(60, 120))))


def _attack_times(attack: AttackSpec, rate: float):
    count = int(round(rate * (attack.end_s - attack.start_s)))
    return [attack.start_s + k / rate for k in range(count)]


def _scan_hosts(base_ip: str):
    """Sequential /24 neighbours of the target, with synthetic MACs."""
    prefix = base_ip.rsplit(".", 1)[0]
    host = 0
    while True:
        host = host % 254 + 1
        yield f"{prefix}.{host}", f"02:f0:00:00:00:{host:02x}"


def _gen_attack(attack: AttackSpec, spec: ScenarioSpec, out: list):
    if attack.kind is AttackKind.SYN_FLOOD:
        for t in _attack_times(attack, attack.intensity):
            out.append(
                (t, _packet(t, attack.attacker, attack.target.ip, attack.target.mac,
                            Protocol.TCP, ("SYN",), 60))
            )
    elif attack.kind is AttackKind.NETWORK_SCAN:
        hosts = _scan_hosts(attack.target.ip)
        for t in _attack_times(attack, attack.intensity):
            ip, mac = next(hosts)
            out.append(
                (t, _packet(t, attack.attacker, ip, mac, Protocol.TCP, ("FIN",), 60))
            )
    elif attack.kind is AttackKind.ARP_SPOOF_MITM:
        spoofed = SourceId(attack.target.ip, attack.attacker.mac)
        hmi = spec.hmi.source
        half = attack.intensity / 2.0
        for t in _attack_times(attack, half):
            out.append(
                (t, _packet(t, spoofed, attack.target.ip, BROADCAST_MAC, Protocol.ARP, (), 60))
            )
        for t in _attack_times(attack, half):
            tr = t + 0.001
            if tr < attack.end_s:
                out.append(
                    (tr, _packet(tr, spoofed, hmi.ip, hmi.mac, Protocol.MODBUS, (), 64))
                )
    else:  # pragma: no cover - enum is closed
        raise InvalidSpec(f"unsupported attack kind {attack.kind}")


def malicious_sources(spec: ScenarioSpec) -> set[SourceId]:
    """The source identity each attack is observable under."""
    out = set()
    for attack in spec.attacks:
        if attack.kind is AttackKind.ARP_SPOOF_MITM:
            out.add(SourceId(attack.target.ip, attack.attacker.mac))
        else:
            out.add(attack.attacker)
    return out


def generate(spec: ScenarioSpec) -> tuple[list[PacketRecord], list[bool]]:
    """Return time-sorted records plus a parallel attack-origin flag list."""
    rng = random.Random(spec.seed)
    background: list[tuple[float, PacketRecord]] = []
    for link in spec.links:
        _gen_link(link, spec, rng, background)
    attack_events: list[tuple[float, PacketRecord]] = []
    for attack in spec.attacks:
        _gen_attack(attack, spec, attack_events)
    merged = [(t, rec, False) for t, rec in background] + [
        (t, rec, True) for t, rec in attack_events
    ]
    merged.sort(key=lambda item: item[0])
    records = [rec for _, rec, _ in merged]
    flags = [flag for _, _, flag in merged]
    return records, flags


def write_labels(
    records: list[PacketRecord],
    flags: list[bool],
    window_s: float,
    path: str | Path,
) -> Path:
    """Ground-truth sidecar: one row per (window, source) with traffic; a
    row is attack-labeled iff that source emitted an attack packet in it."""
    groups: dict[tuple[float, SourceId], bool] = {}
    for record, flag in zip(records, flags):
        key = (window_start(record.timestamp, window_s), record.source)
        groups[key] = groups.get(key, False) or flag
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start", "src_ip", "src_mac", "is_attack"])
        for (w, src), is_attack in sorted(
            groups.items(), key=lambda kv: (kv[0][0], kv[0][1].ip, kv[0][1].mac)
        ):
            writer.writerow([f"{w:.6f}", src.ip, src.mac, int(is_attack)])
    return path


# ---------------------------------------------------------------------------
# Standard desk-scale suite
# ---------------------------------------------------------------------------

def _std_nodes() -> tuple[Node, ...]:
    nodes = [
        Node("hmi", Role.HMI, SourceId("10.0.0.10", "02:0a:00:00:00:01")),
        Node("plc1", Role.PLC, SourceId("10.0.0.21", "02:0a:00:00:00:02")),
        Node("plc2", Role.PLC, SourceId("10.0.0.22", "02:0a:00:00:00:03")),
        Node("mon", Role.SWITCH, SourceId("10.0.0.2", "02:0a:00:00:00:04")),
        Node("ws1", Role.WORKSTATION, SourceId("10.0.0.31", "02:0a:00:00:00:05")),
        Node("ws2", Role.WORKSTATION, SourceId("10.0.0.32", "02:0a:00:00:00:06")),
    ]
    for i in range(1, 10):
        nodes.append(
            Node(f"sens{i}", Role.PLC, SourceId(f"10.0.0.{100 + i}", f"02:0a:00:00:01:{i:02x}"))
        )
    nodes.append(Node("intruder", Role.INTRUDER, SourceId("10.0.0.66", "02:66:00:00:00:66")))
    return tuple(nodes)


def _std_links(nodes: tuple[Node, ...]) -> tuple[Link, ...]:
    links = [
        Link("hmi", "plc1", Protocol.MODBUS, 5.0),
        Link("hmi", "plc2", Protocol.MODBUS, 5.0),
        Link("hmi", "ws1", Protocol.TCP, 0.15, style="session"),
        Link("hmi", "ws2", Protocol.TCP, 0.15, style="session"),
    ]
    # Keepalive sweep from the monitoring switch: every reachable node is
    # probed with a FIN|ACK close once per 4 s. This is the legitimate
    # low-rate many-destination FIN noise that slow scans hide inside.
    for node in nodes:
        if node.name in ("mon", "intruder"):
            continue
        links.append(Link("mon", node.name, Protocol.TCP, 0.25,
                          frozenset({"FIN", "ACK"}), style="periodic"))
    links.append(Link("mon", "hmi", Protocol.ICMP, 0.2, style="periodic"))
    for ws in ("ws1", "ws2"):
        links.append(Link(ws, "hmi", Protocol.TCP, 0.3, style="session"))
        links.append(Link(ws, "hmi", Protocol.UDP, 0.4))
        links.append(Link(ws, "hmi", Protocol.ARP, 0.15, style="periodic"))
        links.append(Link(ws, "hmi", Protocol.ICMP, 0.1, style="periodic"))
    for node in nodes:
        if node.name.startswith("sens"):
            links.append(Link(node.name, "hmi", Protocol.UDP, 0.22))
            links.append(Link(node.name, "hmi", Protocol.ARP, 0.02, style="periodic"))
    for plc in ("plc1", "plc2"):
        links.append(Link(plc, "hmi", Protocol.ARP, 0.05, style="periodic"))
    return tuple(links)


def standard_scenarios(seed: int) -> dict[str, ScenarioSpec]:
    """train plus testA..testD: A normal-only, B spoofing + slow scan,
    C flooding + slow scan, D man-in-the-middle."""
    nodes = _std_nodes()
    links = _std_links(nodes)
    by_name = {n.name: n for n in nodes}
    ws1 = by_name["ws1"].source
    plc1 = by_name["plc1"].source
    plc2 = by_name["plc2"].source
    intruder = by_name["intruder"].source

    def spec(offset, duration, attacks=()):
        return ScenarioSpec(
            seed=seed + offset,
            duration_s=duration,
            nodes=nodes,
            links=links,
            attacks=tuple(attacks),
        )

    return {
        "train": spec(0, 900.0),
        "testA": spec(1, 600.0),
        "testB": spec(
            2,
            600.0,
            [
                AttackSpec(AttackKind.NETWORK_SCAN, ws1, plc1, 150.0, 450.0, 5.0),
                AttackSpec(AttackKind.ARP_SPOOF_MITM, intruder, plc2, 200.0, 400.0, 4.0),
            ],
        ),
        "testC": spec(
            3,
            1200.0,
            [
                AttackSpec(AttackKind.SYN_FLOOD, intruder, plc1, 300.0, 900.0, 150.0),
                AttackSpec(AttackKind.NETWORK_SCAN, ws1, plc2, 200.0, 1000.0, 5.0),
            ],
        ),
        "testD": spec(
            4,
            600.0,
            [AttackSpec(AttackKind.ARP_SPOOF_MITM, intruder, plc1, 100.0, 500.0, 5.0)],
        ),
    }


def standard_suite(seed: int, out_dir: str | Path, window_s: float = 2.0) -> dict[str, Path]:
    """Write train.csv and testA..D.csv plus .labels.csv sidecars for the
    test sets; returns the path of every file written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name, scenario in standard_scenarios(seed).items():
        records, flags = generate(scenario)
        written[name] = write_packet_log(records, out_dir / f"{name}.csv")
        if name != "train":
            written[f"{name}.labels"] = write_labels(
                records, flags, window_s, out_dir / f"{name}.labels.csv"
            )
    return written


# ---------------------------------------------------------------------------
# Scenario config files (flat key = value, repeatable keys)
# ---------------------------------------------------------------------------

def parse_scenario_file(path: str | Path) -> ScenarioSpec:
    """Read a scenario config.

    Recognized keys: ``seed``, ``duration_s``, repeatable ``node`` (name
    role ip mac), ``link`` (src dst protocol rate [FLAG|FLAG]
    [poisson|periodic|session]) and ``attack`` (kind attacker target
    start end intensity).
    """
    path = Path(path)
    seed = None
    duration = None
    nodes: list[Node] = []
    raw_links: list[Link] = []
    raw_attacks: list[tuple] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = value.split()
        try:
            if key == "seed":
                seed = int(value)
            elif key == "duration_s":
                duration = float(value)
            elif key == "node":
                name, role, ip, mac = parts
                nodes.append(Node(name, Role(role.upper()), SourceId(ip, mac)))
            elif key == "link":
                src, dst, proto, rate = parts[:4]
                flags: frozenset[str] = frozenset()
                style = "poisson"
                for extra in parts[4:]:
                    if extra.lower() in LINK_STYLES:
                        style = extra.lower()
                    else:
                        flags = frozenset(extra.split("|"))
                raw_links.append(
                    Link(src, dst, Protocol(proto.upper()), float(rate), flags, style)
                )
            elif key == "attack":
                kind, attacker, target, start, end, intensity = parts
                raw_attacks.append(
                    (AttackKind(kind.upper()), attacker, target, float(start), float(end), float(intensity))
                )
            else:
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if seed is None or duration is None or not nodes:
        raise InvalidSpec(f"{path}: scenario needs seed, duration_s and nodes")
    by_name = {n.name: n for n in nodes}
    attacks = []
    for kind, attacker, target, start, end, intensity in raw_attacks:
        if attacker not in by_name or target not in by_name:
            raise InvalidSpec(f"attack references unknown node {attacker!r}/{target!r}")
        attacks.append(
            AttackSpec(kind, by_name[attacker].source, by_name[target].source, start, end, intensity)
        )
    return ScenarioSpec(
        seed=seed,
        duration_s=duration,
        nodes=tuple(nodes),
        links=tuple(raw_links),
        attacks=tuple(attacks),
    )


def run_scenario_file(path: str | Path, out_dir: str | Path, window_s: float = 2.0) -> dict[str, Path]:
    """Generate one scenario config into <stem>.csv and <stem>.labels.csv."""
    spec = parse_scenario_file(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(path).stem
    records, flags = generate(spec)
    log = write_packet_log(records, out_dir / f"{stem}.csv")
    labels = write_labels(records, flags, window_s, out_dir / f"{stem}.labels.csv")
    return {"log": log, "labels": labels}
