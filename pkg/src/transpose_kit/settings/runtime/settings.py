"""
Runtime configuration module.

This module provides process-wide settings for transpose_kit runs:
where experiment artifacts go, how many BLAS threads numpy may use and
how logging is themed.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

BLAS_THREAD_VARIABLES = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class RuntimeSettings(BaseSettings):
    """
    Process-wide settings for transpose_kit.

    Attributes:
        output_dir (Path): Root directory for experiment run directories.
        threads (int): Thread count handed to the BLAS backend. A value of 1
            gives bit-identical results across runs.
        log_theme (str): Console log theme, ``rich`` or ``plain``.
        log_dir (Path): Directory for JSON-lines log files.
        mnist_dir (Path | None): Optional directory holding the MNIST IDX files.

    Example:
        >>> settings = RuntimeSettings()
        >>> settings.threads
        1

        >>> import os
        >>> os.environ["TRANSPOSE_KIT_OUTPUT_DIR"] = "/tmp/runs"
        >>> RuntimeSettings().output_dir
        PosixPath('/tmp/runs')

    Note:
        Values can be overridden via environment variables or a .env file,
        using the ``TRANSPOSE_KIT_`` prefix.
    """

    output_dir: Path = Field(
        default=Path("runs"), description="Root directory for run artifacts"
    )

    threads: int = Field(default=1, ge=1, description="BLAS thread count")

    log_theme: Literal["rich", "plain"] = Field(
        default="rich", description="Console log theme"
    )

    log_dir: Path = Field(
        default=Path("tk_logs"), description="Directory for JSON-lines logs"
    )

    mnist_dir: Path | None = Field(
        default=None, description="Directory containing MNIST IDX files"
    )

    model_config = SettingsConfigDict(
        env_prefix="TRANSPOSE_KIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    def apply_thread_limits(self) -> None:
        """
        Export the thread count to the BLAS environment variables.

        Only effective when called before numpy is first imported; variables
        already set by the user are left alone.
        """
        for name in BLAS_THREAD_VARIABLES:
            os.environ.setdefault(name, str(self.threads))

    def run_dir(self, name: str, config_hash: str) -> Path:
        """
        Build the directory path for one experiment run.

        Example:
            >>> RuntimeSettings().run_dir("mnist-fc", "0123456789abcdef")
            PosixPath('runs/mnist-fc-0123456789ab')
        """
        return self.output_dir / f"{name}-{config_hash[:12]}"


__all__ = ["RuntimeSettings", "BLAS_THREAD_VARIABLES"]
