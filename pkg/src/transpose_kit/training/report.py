"""Training configuration and per-epoch reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

import orjson
from pydantic import BaseModel, ConfigDict, Field, field_validator

from transpose_kit.nn.optim import OptimizerName

StopReason = Literal["completed", "early_stop"]


class TrainConfig(BaseModel):
    """
    Hyperparameters of one training session.

    `lambda` scales the secondary (memorization) loss; in Python code the
    field is `lam`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lam: float = Field(default=1.0, ge=0.0, alias="lambda")
    optimizer: OptimizerName = "adam"
    learning_rate: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    epochs: int = Field(default=500, ge=1)
    batch_primary: int = Field(default=64, ge=1)
    batch_secondary: int = Field(default=64, ge=1)
    early_stop_patience: int = Field(default=20, ge=1)
    min_delta: float = Field(default=1e-5, ge=0.0)
    seed: int = 0


class EpochRecord(BaseModel):
    epoch: int
    primary_loss: float
    primary_accuracy: float
    secondary_loss: float | None = None
    best_secondary: float | None = None
    test_accuracy: float | None = None
    seconds: float

    @field_validator("primary_loss", "secondary_loss", "best_secondary")
    @classmethod
    def _finite(cls, value: float | None) -> float | None:
        if value is not None and (not math.isfinite(value) or value < 0):
            raise ValueError(f"loss must be finite and nonnegative, got {value}")
        return value


class TrainReport(BaseModel):
    mode: Literal["tandem", "primary_only"]
    started_at: str
    epochs: list[EpochRecord] = Field(default_factory=list)
    stop_reason: StopReason = "completed"
    wall_clock: float = 0.0
    final: dict[str, float] = Field(default_factory=dict)

    @property
    def best_secondary(self) -> float | None:
        return self.epochs[-1].best_secondary if self.epochs else None

    @property
    def final_secondary(self) -> float | None:
        return self.epochs[-1].secondary_loss if self.epochs else None

    def write_jsonl(self, path: Path) -> None:
        """One JSON line per epoch, then a closing summary line."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as handle:
            for record in self.epochs:
                handle.write(orjson.dumps(record.model_dump()) + b"\n")
            handle.write(
                orjson.dumps(
                    {
                        "summary": True,
                        "mode": self.mode,
                        "started_at": self.started_at,
                        "stop_reason": self.stop_reason,
                        "wall_clock": self.wall_clock,
                        "final": self.final,
                    }
                )
                + b"\n"
            )


__all__ = ["TrainConfig", "EpochRecord", "TrainReport", "StopReason"]
