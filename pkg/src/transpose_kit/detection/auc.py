"""Population-level detection statistics."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from transpose_kit.errors import ParameterError


def detection_auc(benign: Sequence[float], malicious: Sequence[float]) -> float:
    """
    Rank AUC where a lower score means "more malicious"; ties count ½.

    Raises:
        ParameterError: if either population is empty.
    """
    if len(benign) == 0 or len(malicious) == 0:
        raise ParameterError("AUC needs nonempty benign and malicious score lists")
    b = np.asarray(benign, dtype=np.float64)[None, :]
    m = np.asarray(malicious, dtype=np.float64)[:, None]
    wins = np.sum(m < b) + 0.5 * np.sum(m == b)
    return float(wins / (b.size * m.size))


def rates(
    benign: Sequence[float], malicious: Sequence[float], threshold: float
) -> tuple[float, float]:
    """(true positive rate, false positive rate) of the rule score <= threshold."""
    if len(benign) == 0 or len(malicious) == 0:
        raise ParameterError("rates need nonempty benign and malicious score lists")
    tpr = float(np.mean(np.asarray(malicious) <= threshold))
    fpr = float(np.mean(np.asarray(benign) <= threshold))
    return tpr, fpr


__all__ = ["detection_auc", "rates"]
