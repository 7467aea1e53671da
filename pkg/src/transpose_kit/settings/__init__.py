from __future__ import annotations

from .runtime import RuntimeSettings

__all__ = ["RuntimeSettings"]
