"""
Logger module for the nearbest package.

Every logger lives under the ``nearbest`` namespace so one dictConfig entry
routes a whole module (and the classes inside it) to its own log file.
Pipeline milestones go through ``log_stage``; ``stage_timer`` adds the
elapsed wall time of a stage such as a map build or a degree sweep.
"""

import logging
import sys
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional, Union

from nearbest.logger_config import setup_logging

ROOT_LOGGER = "nearbest"
FALLBACK_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_is_configured: bool = False


def _qualified(name: str) -> str:
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return name
    return f"{ROOT_LOGGER}.{name}"


def get_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    """
    Get a logger under the package namespace, configuring logging on first use.

    Args:
        name: Module ``__name__`` or a class name; bare names are prefixed with ``nearbest.``

    Returns:
        Logger instance
    """
    global _is_configured

    if not _is_configured:
        try:
            setup_logging()
        except Exception as e:
            print(f"Warning: Could not configure logging from file: {e}", file=sys.stderr)
            _configure_fallback()
        _is_configured = True

    return logging.getLogger(_qualified(name))


def _configure_fallback() -> None:
    """stderr only; stdout carries the CLI's CSV paths and JSON."""
    package = logging.getLogger(ROOT_LOGGER)
    for handler in package.handlers[:]:
        package.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(FALLBACK_FORMAT))
    handler.setLevel(logging.WARNING)
    package.addHandler(handler)
    package.setLevel(logging.DEBUG)
    package.propagate = False


def log_exception(e: Exception, message: str = "An exception occurred",
                  logger: Optional[logging.Logger] = None) -> None:
    """
    Log an exception with traceback.

    Args:
        e: The exception to log
        message: What was being attempted
        logger: Logger to use (default: the package logger)
    """
    (logger or get_logger()).exception(f"{message}: {type(e).__name__}: {e}")


def log_stage(module: str, stage: str, details: str = "") -> None:
    """
    Log a pipeline milestone to the module's logger.

    Args:
        module: Package module (e.g. "conformal", "harness")
        stage: Stage reached (e.g. "map built", "row")
        details: Free-form details
    """
    get_logger(module).info(f"[{module}] {stage.upper()} {details}".rstrip())


@contextmanager
def stage_timer(module: str, stage: str, details: str = "") -> Iterator[Dict[str, Any]]:
    """
    Time a stage and log it on exit.

    The yielded dict may be filled with details known only at the end
    (``info["details"]``); ``info["ms"]`` holds the elapsed time afterwards.
    A stage that raises is logged as failed and the exception propagates.
    """
    info: Dict[str, Any] = {"details": details, "ms": float("nan")}
    start = time.perf_counter()
    try:
        yield info
    except Exception:
        info["ms"] = 1e3 * (time.perf_counter() - start)
        log_stage(module, f"{stage} failed", f"after {info['ms']:.1f} ms")
        raise
    info["ms"] = 1e3 * (time.perf_counter() - start)
    log_stage(module, stage, f"{info['details']} ({info['ms']:.1f} ms)".lstrip())


def set_log_level(level: Union[int, str]) -> None:
    """
    Set the console level of the package loggers; file handlers stay at DEBUG.

    Args:
        level: Log level (e.g., logging.INFO or 'INFO')
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper())

    seen = set()
    loggers = [logging.getLogger(), logging.getLogger(ROOT_LOGGER)]
    loggers += [logging.getLogger(name) for name in list(logging.root.manager.loggerDict)
                if name.startswith(ROOT_LOGGER + ".")]
    for logger in loggers:
        for handler in logger.handlers:
            if id(handler) in seen:
                continue
            seen.add(id(handler))
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)

    get_logger().debug(f"Console log level set to {logging.getLevelName(level)}")
