from __future__ import annotations

from .logger import NOTICE, SUCCESS, TRACE, get_logger, setup_logging

__all__ = ["setup_logging", "get_logger", "TRACE", "SUCCESS", "NOTICE"]
