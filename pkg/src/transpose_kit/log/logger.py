from __future__ import annotations

import atexit
import datetime as dt
import logging
import logging.config
import os
import pathlib
from importlib import resources
from typing import Any, override

from orjson import (
    OPT_NON_STR_KEYS,
    OPT_SERIALIZE_DATACLASS,
    OPT_SERIALIZE_NUMPY,
    OPT_UTC_Z,
    dumps,
)
from yaml import safe_load

TRACE = 5
SUCCESS = 22
NOTICE = 25


def add_custom_level(level_name: str, level_num: int, method_name: str | None = None):
    """
    Add a new logging level to the `logging` module and the Logger class.

    Args:
        level_name: The name of the new level (e.g., 'TRACE')
        level_num: The numeric value for the level (e.g., 5)
        method_name: The method name to add to Logger (defaults to level_name.lower())
    """
    if method_name is None:
        method_name = level_name.lower()

    logging.addLevelName(level_num, level_name)

    def log_for_level(self, message, *args, **kwargs):
        if self.isEnabledFor(level_num):
            self._log(level_num, message, args, **kwargs)

    setattr(logging.Logger, method_name, log_for_level)


add_custom_level("TRACE", TRACE)  # per-batch detail
add_custom_level("SUCCESS", SUCCESS)  # finished runs, passed oracles
add_custom_level("NOTICE", NOTICE)  # early stops, verdicts

LOG_RECORD_BUILTIN_ATTRS = {
    "args",
    "asctime",
    "created",
    "exc_info",
    "exc_text",
    "filename",
    "funcName",
    "levelname",
    "levelno",
    "lineno",
    "module",
    "msecs",
    "message",
    "msg",
    "name",
    "pathname",
    "process",
    "processName",
    "relativeCreated",
    "stack_info",
    "thread",
    "threadName",
    "taskName",
    "verbose_only",
    "markup",
    "highlighter",
}


class JSONFormatter(logging.Formatter):
    """JSON-lines formatter; `extra` fields become top-level keys."""

    def __init__(self, *, fmt_keys: dict[str, str] | None = None):
        super().__init__()
        self.fmt_keys = fmt_keys if fmt_keys is not None else {}

    @override
    def format(self, record: logging.LogRecord) -> str:
        message = self._prepare_log_dict(record)
        return dumps(
            message,
            option=OPT_SERIALIZE_DATACLASS
            | OPT_SERIALIZE_NUMPY
            | OPT_NON_STR_KEYS
            | OPT_UTC_Z,
            default=str,
        ).decode("utf-8")

    def _prepare_log_dict(self, record: logging.LogRecord) -> dict[str, Any]:
        always_fields = {
            "message": record.getMessage(),
            "timestamp": dt.datetime.fromtimestamp(
                record.created, tz=dt.timezone.utc
            ).isoformat(),
        }
        if record.exc_info is not None:
            always_fields["exc_info"] = self.formatException(record.exc_info)

        if record.stack_info is not None:
            always_fields["stack_info"] = self.formatStack(record.stack_info)

        message = {
            key: msg_val
            if (msg_val := always_fields.pop(val, None)) is not None
            else getattr(record, val)
            for key, val in self.fmt_keys.items()
        }
        message.update(always_fields)

        for key, val in record.__dict__.items():
            if key not in LOG_RECORD_BUILTIN_ATTRS:
                message[key] = val

        return message


class AlignedFormatter(logging.Formatter):
    """Plain console formatter with fixed-width level/module columns."""

    LEVEL_WIDTH = 8
    MODULE_WIDTH = 18
    FUNC_WIDTH = 24

    @override
    def format(self, record: logging.LogRecord) -> str:
        timestamp = self.formatTime(record, self.datefmt)
        func_name = (
            record.funcName[: self.FUNC_WIDTH - 3] + "..."
            if len(record.funcName) > self.FUNC_WIDTH
            else record.funcName
        )
        extras = " ".join(
            f"{key}={val}"
            for key, val in record.__dict__.items()
            if key not in LOG_RECORD_BUILTIN_ATTRS
        )
        line = (
            f"[{record.levelname:<{self.LEVEL_WIDTH}}][{timestamp}] "
            f"{record.module[: self.MODULE_WIDTH]:<{self.MODULE_WIDTH}} "
            f"({func_name:<{self.FUNC_WIDTH}}) | {record.getMessage()}"
        )
        if extras:
            line = f"{line} | {extras}"
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line


class VerboseFilter(logging.Filter):
    """Filter that hides messages marked as verbose_only from console output."""

    @override
    def filter(self, record: logging.LogRecord) -> bool:
        return not getattr(record, "verbose_only", False)


def get_dynamic_log_filename(
    log_dir: pathlib.Path, app_name: str | None = None, include_pid: bool = False
) -> pathlib.Path:
    """Build `<log_dir>/<app>_<timestamp>[_pid<n>].log.jsonl`, creating log_dir."""
    components = [app_name or "transpose_kit", dt.datetime.now().strftime("%Y%m%d_%H%M%S")]
    if include_pid:
        components.append(f"pid{os.getpid()}")
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir / f"{'_'.join(components)}.log.jsonl"


_CONFIGURED = False


def setup_logging(
    theme: str = "rich",
    log_dir: pathlib.Path | str = "tk_logs",
    log_file: pathlib.Path | str | None = None,
    app_name: str | None = None,
    include_pid: bool = False,
    console_level: str = "INFO",
) -> logging.Logger:
    """Configure the root logger from the packaged YAML for `theme`.

    Args:
        theme: Console theme, "rich" or "plain"
        log_dir: Directory for the JSON-lines log file
        log_file: Explicit log file path; generated when None
        app_name: Optional application name included in the generated file name
        include_pid: Whether to include the process ID in the generated file name
        console_level: Minimum level shown on stderr

    Returns:
        The configured root logger
    """
    global _CONFIGURED

    root = logging.getLogger()
    if _CONFIGURED:
        return root

    config_name = (
        "rich_stderr_json_file.yml" if theme == "rich" else "plain_stderr_json_file.yml"
    )
    config_text = (
        resources.files("transpose_kit.log.config").joinpath(config_name).read_text()
    )
    config = safe_load(config_text)

    if log_file is None:
        log_file = get_dynamic_log_filename(pathlib.Path(log_dir), app_name, include_pid)

    for handler in config.get("handlers", {}).values():
        if handler.get("class") == "logging.handlers.RotatingFileHandler":
            handler["filename"] = str(log_file)
            handler["encoding"] = "utf-8"
        if handler.get("class") in {"logging.StreamHandler", "rich.logging.RichHandler"}:
            handler["level"] = console_level

    logging.config.dictConfig(config)

    queue_handler = logging.getHandlerByName("queue_handler")
    if queue_handler is not None:
        listener = getattr(queue_handler, "listener", None)
        if listener is not None:
            listener.start()
            atexit.register(listener.stop)

    if not hasattr(logging.Logger, "debug_verbose"):

        def debug_verbose(self, message, *args, **kwargs):
            """Log debug message to file only, not to console"""
            kwargs_copy = kwargs.copy()
            kwargs_copy.setdefault("extra", {})["verbose_only"] = True
            self.debug(message, *args, **kwargs_copy)

        logging.Logger.debug_verbose = debug_verbose  # type: ignore[attr-defined]

    _CONFIGURED = True
    root.info("Logging to file: %s", log_file)
    return root


def get_logger(name: str = "transpose_kit") -> logging.Logger:
    """Return a named logger; handlers come from `setup_logging`."""
    return logging.getLogger(name)


__all__ = [
    "TRACE",
    "SUCCESS",
    "NOTICE",
    "JSONFormatter",
    "AlignedFormatter",
    "VerboseFilter",
    "add_custom_level",
    "get_dynamic_log_filename",
    "setup_logging",
    "get_logger",
]
