from __future__ import annotations

from .auc import detection_auc, rates
from .probe import DetectConfig, DetectionReport, ProbeResult, bim_probe, detect, mean_image
from .threshold import ThresholdSelection, default_ladder, select_threshold

__all__ = [
    "DetectConfig",
    "DetectionReport",
    "ProbeResult",
    "bim_probe",
    "detect",
    "mean_image",
    "detection_auc",
    "rates",
    "ThresholdSelection",
    "default_ladder",
    "select_threshold",
]
