"""
Transposed-model probe.

Starting from uniform random inputs, iterate

    e <- e - α · ∇_e MSE(f'(e), x̄)        (or α · sign(∇) for the sign rule)

with the parameters frozen. A model trained to memorize images can steer its
transposed output close to the dataset mean; a benign model cannot. The
probe score is the final MSE, minimized over restarts.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from returns.result import Failure, Result, Success, safe

from transpose_kit.autodiff.tensor import (
    Array,
    Tensor,
    backward,
    mean_axis,
    mul,
    no_grad,
    reshape,
    sub,
    tensor_sum,
)
from transpose_kit.data.dataset import LabeledDataset, dataset_mean
from transpose_kit.errors import DimensionError, NonFiniteError, ProbeError
from transpose_kit.log import get_logger
from transpose_kit.nn.model import Model

logger = get_logger(__name__)

StepRule = Literal["gradient", "sign"]
Verdict = Literal["benign", "malicious"]


class DetectConfig(BaseModel):
    """
    Attributes:
        alpha: Step size α.
        iterations: Maximum steps k per restart.
        restarts: Independent uniform initializations.
        step_rule: "gradient" or "sign".
        tolerance: A restart stops once one step changes its score by less.
        threshold: Fixed decision threshold, or "auto" to derive it from x̄.
        ssim_cutoff: SSIM level the automatic threshold searches for.
        mean_samples: Images averaged into x̄ (all when unset).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.1, ge=0.0)
    iterations: int = Field(default=300, ge=1)
    restarts: int = Field(default=20, ge=1)
    step_rule: StepRule = "gradient"
    tolerance: float = Field(default=1e-8, ge=0.0)
    threshold: float | Literal["auto"] = "auto"
    ssim_cutoff: float = Field(default=0.5, gt=-1.0, lt=1.0)
    mean_samples: int | None = Field(default=None, ge=1)
    seed: int = 0


class ProbeResult(BaseModel):
    scores: list[float]
    iterations: list[int]

    @property
    def min_score(self) -> float:
        return min(self.scores)


class DetectionReport(BaseModel):
    scores: list[float]
    min_score: float
    threshold: float
    verdict: Verdict
    auc: float | None = None


def _scores(output: Tensor, target: Array) -> Tensor:
    """Per-restart MSE of `output [R, ...]` against `target`."""
    diff = sub(output, Tensor(target[None]))
    squared = reshape(mul(diff, diff), (output.shape[0], -1))
    return mean_axis(squared, 1)


def _descend(transposed: Model, start: Array, target: Array, cfg: DetectConfig) -> ProbeResult:
    """Run the iteration for a batch of restarts; raises NonFiniteError on bad gradients."""
    e = start.copy()
    active = np.ones(len(e), dtype=bool)
    steps = np.zeros(len(e), dtype=np.int64)
    with no_grad():
        current = _scores(transposed(Tensor(e)), target).data.astype(np.float64)

    for _ in range(cfg.iterations):
        if not active.any():
            break
        leaf = Tensor(e, requires_grad=True)
        backward(tensor_sum(_scores(transposed(leaf), target)))
        grad = leaf.grad if leaf.grad is not None else np.zeros_like(e)
        step = np.sign(grad) if cfg.step_rule == "sign" else grad
        mask = active.reshape(-1, *([1] * (e.ndim - 1)))
        e = np.where(mask, e - cfg.alpha * step, e).astype(e.dtype)
        with no_grad():
            updated = _scores(transposed(Tensor(e)), target).data.astype(np.float64)
        steps += active
        converged = np.abs(current - updated) < cfg.tolerance
        current = np.where(active, updated, current)
        active &= ~converged

    return ProbeResult(scores=current.tolist(), iterations=steps.tolist())


def _restart_outcome(
    transposed: Model, start: Array, target: Array, cfg: DetectConfig
) -> Result[float, ProbeError]:
    outcome = safe(exceptions=(NonFiniteError,))(_descend)(transposed, start[None], target, cfg)
    match outcome:
        case Success(result) if math.isfinite(result.scores[0]):
            return Success(result.scores[0])
        case Success(result):
            return Failure(ProbeError(f"restart ended with score {result.scores[0]}"))
        case Failure(error):
            return Failure(ProbeError(str(error)))
    raise AssertionError("unreachable")


def bim_probe(model: Model, xbar: Array, cfg: DetectConfig | None = None) -> ProbeResult:
    """
    Probe the transposed view of `model` toward the mean image `xbar`.

    Restarts run as one batch. If the batch hits a non-finite gradient, the
    restarts are rerun one by one and each failing restart scores +inf.

    Raises:
        DimensionError: if `xbar` does not match the transposed output shape.
    """
    cfg = cfg or DetectConfig()
    transposed = model.as_transposed()
    if tuple(xbar.shape) != transposed.output_shape:
        raise DimensionError(
            f"mean image {xbar.shape} does not match transposed output {transposed.output_shape}"
        )
    rng = np.random.default_rng(cfg.seed)
    starts = rng.uniform(0.0, 1.0, size=(cfg.restarts, *transposed.input_shape)).astype(np.float32)
    target = np.asarray(xbar, dtype=np.float32)

    with transposed.frozen():
        try:
            result = _descend(transposed, starts, target, cfg)
        except NonFiniteError:
            logger.warning("Batched probe hit a non-finite gradient; retrying per restart")
            scores = []
            for index, start in enumerate(starts):
                match _restart_outcome(transposed, start, target, cfg):
                    case Success(score):
                        scores.append(score)
                    case Failure(error):
                        logger.warning("Probe restart failed", extra={"restart": index, "error": str(error)})
                        scores.append(math.inf)
            result = ProbeResult(scores=scores, iterations=[cfg.iterations] * len(scores))
    result = ProbeResult(
        scores=[s if math.isfinite(s) else math.inf for s in result.scores],
        iterations=result.iterations,
    )
    logger.debug("Probe finished", extra={"min_score": result.min_score, "restarts": cfg.restarts})
    return result


def mean_image(
    dataset: LabeledDataset, samples: int | None = None, seed: int = 0
) -> Array:
    """x̄ over the whole dataset or over `samples` randomly chosen images."""
    images = dataset.images
    if samples is not None and samples < len(images):
        chosen = np.random.default_rng(seed).choice(len(images), size=samples, replace=False)
        images = images[np.sort(chosen)]
    return dataset_mean(images)


def detect(
    model: Model, xbar: Array, threshold: float, cfg: DetectConfig | None = None
) -> DetectionReport:
    """Verdict "malicious" iff the lowest probe score is at or below `threshold`."""
    probe = bim_probe(model, xbar, cfg)
    verdict: Verdict = "malicious" if probe.min_score <= threshold else "benign"
    logger.info(
        "Detection verdict",
        extra={"verdict": verdict, "min_score": probe.min_score, "threshold": threshold},
    )
    return DetectionReport(
        scores=probe.scores, min_score=probe.min_score, threshold=threshold, verdict=verdict
    )


__all__ = [
    "DetectConfig",
    "DetectionReport",
    "ProbeResult",
    "StepRule",
    "bim_probe",
    "detect",
    "mean_image",
]
