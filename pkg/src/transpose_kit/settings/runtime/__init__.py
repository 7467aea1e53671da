from __future__ import annotations

from .settings import BLAS_THREAD_VARIABLES, RuntimeSettings

__all__ = ["RuntimeSettings", "BLAS_THREAD_VARIABLES"]
