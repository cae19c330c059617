"""Split one-class-SVM anomaly detection for SCADA network traffic."""

from .pipeline import DetectorConfig, TrainedDetector, detect, train_detector
from .records import (
    AggregatedAlarm,
    Alert,
    AlertKind,
    FeatureVector,
    PacketRecord,
    Protocol,
    Severity,
    SourceId,
    SourceProfile,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatedAlarm",
    "Alert",
    "AlertKind",
    "DetectorConfig",
    "FeatureVector",
    "PacketRecord",
    "Protocol",
    "Severity",
    "SourceId",
    "SourceProfile",
    "TrainedDetector",
    "detect",
    "train_detector",
    "__version__",
]
