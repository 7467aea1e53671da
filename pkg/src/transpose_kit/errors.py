"""Exception hierarchy shared by every transpose_kit module."""

from __future__ import annotations


class TransposeKitError(Exception):
    """Base class for all errors raised by transpose_kit."""


class DimensionError(TransposeKitError):
    """Tensor or layer shapes do not line up."""


class ParameterError(TransposeKitError):
    """An operation received an out-of-range hyperparameter."""


class ContractError(TransposeKitError):
    """A caller broke an operation's precondition (e.g. non-scalar loss)."""


class NonFiniteError(TransposeKitError):
    """A NaN or Inf showed up in a computation."""

    def __init__(self, message: str, node_id: int | None = None) -> None:
        super().__init__(message if node_id is None else f"{message} (node {node_id})")
        self.node_id = node_id


class ConstructionError(TransposeKitError):
    """A model could not be assembled from its layer specs."""

    def __init__(self, message: str, layer_index: int | None = None) -> None:
        prefix = "" if layer_index is None else f"layer {layer_index}: "
        super().__init__(f"{prefix}{message}")
        self.layer_index = layer_index


class UnsupportedLayerError(TransposeKitError):
    """The layer kind has no transposition rule."""


class CapacityExceededError(TransposeKitError):
    """An index or payload does not fit the available capacity."""


class SchemeCapacityError(CapacityExceededError):
    """The n-hot class embedding has more classes than code dimensions."""


class DivergenceError(TransposeKitError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int) -> None:
        super().__init__(f"{message} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class DataError(TransposeKitError):
    """Labels or samples are inconsistent with the task."""


class FormatError(DataError):
    """A data file does not follow its declared binary format."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        suffix = "" if offset is None else f" (byte offset {offset})"
        super().__init__(f"{message}{suffix}")
        self.offset = offset


class CorruptionError(TransposeKitError):
    """A model file failed its integrity checks."""


class VersionError(TransposeKitError):
    """A model file uses an unknown format version or layer kind."""


class IntegrityError(TransposeKitError):
    """A stego manifest does not match the model it is applied to."""


class ProbeError(TransposeKitError):
    """A detection probe restart failed to produce a finite score."""


class ThresholdError(TransposeKitError):
    """Automatic threshold selection did not find a crossing."""


class ConfigError(TransposeKitError):
    """An experiment configuration file is invalid."""


__all__ = [
    "TransposeKitError",
    "DimensionError",
    "ParameterError",
    "ContractError",
    "NonFiniteError",
    "ConstructionError",
    "UnsupportedLayerError",
    "CapacityExceededError",
    "SchemeCapacityError",
    "DivergenceError",
    "DataError",
    "FormatError",
    "CorruptionError",
    "VersionError",
    "IntegrityError",
    "ProbeError",
    "ThresholdError",
    "ConfigError",
]
