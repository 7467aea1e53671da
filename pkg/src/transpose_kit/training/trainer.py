"""
Tandem training of a model and its transposed view.

Every iteration takes a primary step (cross-entropy on a labeled batch,
through the forward model) and then a secondary step (λ-scaled mean squared
error between the transposed model's output at the spatial index of each
memorized sample and that sample). Both steps update the same parameter
buffers.
"""

from __future__ import annotations

import math
import time
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from whenever import Instant

from transpose_kit.autodiff import functional as F
from transpose_kit.autodiff.tensor import Array, Tensor, backward, mul
from transpose_kit.data.dataset import LabeledDataset, MemorizationSet
from transpose_kit.errors import DivergenceError, ParameterError
from transpose_kit.log import SUCCESS, get_logger
from transpose_kit.nn.model import Model
from transpose_kit.nn.optim import Optimizer, make_optimizer

from .evaluate import accuracy, secondary_mse
from .report import EpochRecord, TrainConfig, TrainReport

logger = get_logger(__name__)


def _cycle_batches(
    memorized: MemorizationSet, batch_size: int, rng: np.random.Generator
) -> Iterator[tuple[Array, Array]]:
    """Endless memorization batches; reshuffled on every wrap-around."""
    while True:
        order = rng.permutation(len(memorized))
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            yield memorized.indices[chosen], memorized.images[chosen]


def _check_finite(loss: Tensor, what: str, epoch: int, batch: int) -> None:
    if not math.isfinite(loss.item()):
        raise DivergenceError(f"{what} loss became {loss.item()}", epoch, batch)


@dataclass
class _Session:
    model: Model
    transposed: Model
    primary: Optimizer
    secondary: Optimizer | None


def _session(model: Model, cfg: TrainConfig, tandem: bool) -> _Session:
    forward = model.as_forward()
    transposed = forward.transpose()
    primary = make_optimizer(cfg.optimizer, forward.parameters(), cfg.learning_rate, cfg.weight_decay)
    secondary = (
        make_optimizer(cfg.optimizer, transposed.parameters(), cfg.learning_rate, cfg.weight_decay)
        if tandem
        else None
    )
    return _Session(forward, transposed, primary, secondary)


def _train(
    model: Model,
    train: LabeledDataset,
    cfg: TrainConfig,
    memorized: MemorizationSet | None,
    tandem: bool,
    test: LabeledDataset | None,
) -> TrainReport:
    if len(train) == 0:
        raise ParameterError("training set is empty")
    if tandem and (memorized is None or len(memorized) == 0):
        raise ParameterError("tandem training needs a nonempty memorization set")

    session = _session(model, cfg, tandem)
    rng = np.random.default_rng(cfg.seed)
    secondary_batches = (
        _cycle_batches(memorized, cfg.batch_secondary, np.random.default_rng([cfg.seed, 1]))
        if tandem and memorized is not None
        else None
    )
    report = TrainReport(
        mode="tandem" if tandem else "primary_only", started_at=str(Instant.now())
    )
    best = math.inf
    stale = 0
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        epoch_start = time.perf_counter()
        losses: list[float] = []
        correct = 0
        for batch, (images, labels) in enumerate(train.batches(cfg.batch_primary, rng)):
            session.model.zero_grad()
            logits = session.model(Tensor(images))
            loss = F.cross_entropy(logits, labels)
            _check_finite(loss, "primary", epoch, batch)
            backward(loss)
            session.primary.step()
            losses.append(loss.item())
            correct += int(np.sum(logits.data.argmax(axis=1) == labels))

            if secondary_batches is not None and session.secondary is not None and cfg.lam > 0:
                indices, targets = next(secondary_batches)
                session.model.zero_grad()
                reconstruction = session.transposed(Tensor(indices))
                loss2 = mul(F.mse(reconstruction, targets), cfg.lam)
                _check_finite(loss2, "secondary", epoch, batch)
                backward(loss2)
                session.secondary.step()

        record = EpochRecord(
            epoch=epoch,
            primary_loss=float(np.mean(losses)),
            primary_accuracy=correct / len(train),
            test_accuracy=accuracy(session.model, test) if test is not None else None,
            seconds=time.perf_counter() - epoch_start,
        )
        if memorized is not None and len(memorized):
            current = secondary_mse(session.model, memorized)
            if not math.isfinite(current):
                raise DivergenceError("secondary reconstruction became non-finite", epoch, -1)
            improved = best - current > cfg.min_delta
            best = min(best, current)
            stale = 0 if improved else stale + 1
            record = record.model_copy(update={"secondary_loss": current, "best_secondary": best})
        report.epochs.append(record)
        logger.info(
            "Epoch done",
            extra={
                "epoch": epoch,
                "primary_loss": record.primary_loss,
                "primary_accuracy": record.primary_accuracy,
                "secondary_loss": record.secondary_loss,
            },
        )
        if tandem and stale >= cfg.early_stop_patience:
            report.stop_reason = "early_stop"
            logger.info("Early stop", extra={"epoch": epoch, "best_secondary": best})
            break

    report.wall_clock = time.perf_counter() - started
    final = report.epochs[-1]
    report.final = {"primary_accuracy": final.primary_accuracy, "primary_loss": final.primary_loss}
    if final.test_accuracy is not None:
        report.final["test_accuracy"] = final.test_accuracy
    if final.secondary_loss is not None:
        report.final["secondary_mse"] = final.secondary_loss
    logger.log(SUCCESS, "Training finished", extra={"mode": report.mode, **report.final})
    return report


def transpose_train(
    model: Model,
    train: LabeledDataset,
    memorized: MemorizationSet,
    cfg: TrainConfig,
    test: LabeledDataset | None = None,
) -> TrainReport:
    """
    Train the primary task and the memorization task in tandem.

    Early stopping watches the epoch's secondary MSE with
    `cfg.early_stop_patience` and `cfg.min_delta`.

    Raises:
        DivergenceError: on a non-finite loss (names epoch and batch).
        ParameterError: for an empty training or memorization set.
    """
    return _train(model, train, cfg, memorized, True, test)


def train_primary_only(
    model: Model,
    train: LabeledDataset,
    cfg: TrainConfig,
    test: LabeledDataset | None = None,
    memorized: MemorizationSet | None = None,
) -> TrainReport:
    """Forward-only training; `memorized`, when given, is monitored but not trained."""
    return _train(model, train, cfg, memorized, False, test)


@dataclass(frozen=True, slots=True)
class FineTuneResult:
    before: float
    after: float
    accuracy_before: float
    accuracy_after: float

    @property
    def ratio(self) -> float:
        return self.after / self.before if self.before > 0 else math.inf


def fine_tune_defense(
    model: Model,
    train: LabeledDataset,
    memorized: MemorizationSet,
    epochs: int = 5,
    cfg: TrainConfig | None = None,
    test: LabeledDataset | None = None,
) -> FineTuneResult:
    """Secondary MSE before and after `epochs` of primary-only fine-tuning (in place)."""
    cfg = (cfg or TrainConfig()).model_copy(update={"epochs": epochs})
    reference = test if test is not None else train
    before, acc_before = secondary_mse(model, memorized), accuracy(model, reference)
    train_primary_only(model, train, cfg)
    after, acc_after = secondary_mse(model, memorized), accuracy(model, reference)
    logger.info(
        "Fine-tuning defense", extra={"before": before, "after": after, "epochs": epochs}
    )
    return FineTuneResult(before, after, acc_before, acc_after)


__all__ = ["transpose_train", "train_primary_only", "fine_tune_defense", "FineTuneResult"]
