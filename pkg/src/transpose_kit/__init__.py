"""Transpose Kit - bidirectional network training, extraction, attacks and defenses."""

__version__ = "0.1.0"

from .settings import RuntimeSettings

# Thread limits must be exported before any submodule imports numpy.
RuntimeSettings().apply_thread_limits()

__all__ = ["RuntimeSettings", "__version__"]
