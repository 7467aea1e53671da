"""Automatic decision threshold from the dataset mean image."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import ParameterError, ThresholdError
from transpose_kit.extraction.metrics import mse, ssim
from transpose_kit.log import get_logger

logger = get_logger(__name__)


def default_ladder() -> Array:
    return np.geomspace(1e-3, 2.0, 80)


@dataclass(frozen=True, slots=True)
class ThresholdSelection:
    sigma: float
    threshold: float
    ssim: float


def select_threshold(
    xbar: Array,
    sigmas: Sequence[float] | Array | None = None,
    cutoff: float = 0.5,
    seed: int = 0,
) -> ThresholdSelection:
    """
    Add white Gaussian noise to `xbar` with growing σ until its SSIM to the
    clean image drops below `cutoff`; the threshold is the MSE at that σ.

    One unit-normal noise field (drawn from `seed`) is scaled for every σ.
    If the first rung already crosses, the first rung is used.

    Raises:
        ParameterError: if the ladder is empty or not strictly increasing.
        ThresholdError: if no rung crosses the cutoff.
    """
    ladder = np.asarray(default_ladder() if sigmas is None else sigmas, dtype=np.float64)
    if ladder.size == 0 or np.any(np.diff(ladder) <= 0):
        raise ParameterError("sigma ladder must be nonempty and strictly increasing")
    clean = np.asarray(xbar, dtype=np.float64)
    field = np.random.default_rng(seed).standard_normal(clean.shape)
    for sigma in ladder.tolist():
        noisy = clean + sigma * field
        similarity = ssim(noisy, clean)
        if similarity < cutoff:
            selection = ThresholdSelection(sigma, mse(noisy, clean), similarity)
            logger.info(
                "Threshold selected",
                extra={"sigma": sigma, "threshold": selection.threshold, "ssim": similarity},
            )
            return selection
    raise ThresholdError(
        f"SSIM never fell below {cutoff} up to sigma={ladder[-1]:g}; extend the sigma ladder"
    )


__all__ = ["ThresholdSelection", "select_threshold", "default_ladder"]
