from __future__ import annotations

from .extract import ExtractedDataset, QualityReport, extract_all, feature_accuracy, quality_report
from .metrics import mse, per_sample_mse, ssim, ssim_batch
from .retrain import exports_required, retrain_utility
from .store import load_extracted, save_extracted

__all__ = [
    "ExtractedDataset",
    "QualityReport",
    "extract_all",
    "feature_accuracy",
    "quality_report",
    "mse",
    "ssim",
    "ssim_batch",
    "per_sample_mse",
    "retrain_utility",
    "exports_required",
    "save_extracted",
    "load_extracted",
]
