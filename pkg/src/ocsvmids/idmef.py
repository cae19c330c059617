"""IDMEF-style XML alert files for an external correlator.

One file per alarm, named ``alert_<analyzerid>_<seq>.xml``. The message
carries the detecting analyzer, the detection time (capture-relative
seconds mapped onto a configurable wall-clock epoch), the source node's
IP and MAC, a severity classification, and the fused qa/qb values as
AdditionalData.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import UnsetSeverity
from .records import AggregatedAlarm, Severity

CLASSIFICATION_TEXT = {
    Severity.POSSIBLE: "Possible attack",
    Severity.MEDIUM: "Medium attack",
    Severity.SEVERE: "Severe attack",
}


def _iso_time(epoch: float, offset_s: float) -> str:
    return datetime.fromtimestamp(epoch + offset_s, tz=timezone.utc).isoformat()


def build_message(alarm: AggregatedAlarm, analyzer_id: str, epoch: float = 0.0) -> ET.Element:
    if alarm.severity is None:
        raise UnsetSeverity(f"alarm for {alarm.source.ip} has no severity")
    root = ET.Element("IDMEF-Message", {"version": "1.0"})
    alert = ET.SubElement(root, "Alert")
    ET.SubElement(alert, "Analyzer", {"analyzerid": analyzer_id})
    create = ET.SubElement(alert, "CreateTime")
    create.text = _iso_time(epoch, alarm.last_seen)
    node = ET.SubElement(ET.SubElement(alert, "Source"), "Node")
    addr_ip = ET.SubElement(node, "Address", {"category": "ipv4-addr"})
    ET.SubElement(addr_ip, "address").text = alarm.source.ip
    addr_mac = ET.SubElement(node, "Address", {"category": "mac"})
    ET.SubElement(addr_mac, "address").text = alarm.source.mac
    ET.SubElement(alert, "Classification", {"text": CLASSIFICATION_TEXT[alarm.severity]})
    qa = ET.SubElement(alert, "AdditionalData", {"type": "real", "meaning": "qa"})
    qa.text = repr(alarm.qa)
    qb = ET.SubElement(alert, "AdditionalData", {"type": "integer", "meaning": "qb"})
    qb.text = str(alarm.qb)
    return root


def emit_idmef(
    alarm: AggregatedAlarm,
    analyzer_id: str,
    out_dir: str | Path,
    epoch: float = 0.0,
    seq: int = 1,
) -> Path:
    """Write one alert file; raises OSError when out_dir is unusable."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise OSError(f"not a writable directory: {out_dir}")
    root = build_message(alarm, analyzer_id, epoch)
    ET.indent(root)
    path = out_dir / f"alert_{analyzer_id}_{seq:04d}.xml"
    ET.ElementTree(root).write(path, encoding="unicode", xml_declaration=True)
    return path


@dataclass
class IdmefEmitter:
    """Sequential single-writer emitter; keeps the per-batch numbering."""

    out_dir: Path
    analyzer_id: str
    epoch: float = 0.0
    _seq: int = field(default=0, init=False)

    def emit(self, alarm: AggregatedAlarm) -> Path:
        self._seq += 1
        return emit_idmef(alarm, self.analyzer_id, self.out_dir, self.epoch, self._seq)

    def emit_all(self, alarms: list[AggregatedAlarm]) -> list[Path]:
        return [self.emit(a) for a in alarms]


def parse_idmef(path: str | Path) -> dict:
    """Read back the five field groups of an emitted alert file."""
    root = ET.parse(path).getroot()
    alert = root.find("Alert")
    addresses = {
        a.get("category"): a.findtext("address")
        for a in alert.findall("Source/Node/Address")
    }
    extra = {
        d.get("meaning"): d.text for d in alert.findall("AdditionalData")
    }
    return {
        "analyzer_id": alert.find("Analyzer").get("analyzerid"),
        "create_time": alert.findtext("CreateTime"),
        "ip": addresses.get("ipv4-addr"),
        "mac": addresses.get("mac"),
        "classification": alert.find("Classification").get("text"),
        "qa": float(extra["qa"]),
        "qb": int(extra["qb"]),
    }
