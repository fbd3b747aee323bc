"""
Logging configuration for the nearbest package, read from a dictConfig JSON file.
"""

import json
import logging.config
import os
from pathlib import Path
from typing import Any, Dict, Optional

from nearbest.config import get_log_config_path, get_log_dir

PACKAGED_CONFIG = Path(__file__).resolve().parents[2] / "logging_config.json"


def _find_config(config_path: Optional[str]) -> Optional[Path]:
    """Explicit path, then NEARBEST_LOG_CONFIG, then ./logging_config.json, then the repository copy."""
    for candidate in (config_path, get_log_config_path(), "logging_config.json", PACKAGED_CONFIG):
        if candidate and Path(candidate).is_file():
            return Path(candidate)
    return None


def relocate_file_handlers(config: Dict[str, Any], log_dir: Optional[str]) -> Dict[str, Any]:
    """
    Point every file handler into ``log_dir`` (keeping file names) and create
    the directories the handlers need.
    """
    for handler in config.get("handlers", {}).values():
        filename = handler.get("filename")
        if not filename:
            continue
        if log_dir:
            filename = os.path.join(log_dir, os.path.basename(filename))
            handler["filename"] = filename
        directory = os.path.dirname(filename)
        if directory:
            os.makedirs(directory, exist_ok=True)
    return config


def setup_logging(config_path: Optional[str] = None, default_level: int = logging.WARNING) -> None:
    """
    Configure logging from the first config file found.

    NEARBEST_LOG_DIR moves all log files, so parallel experiment runs can
    keep separate logs. Without a config file only a stderr handler is set up.
    """
    path = _find_config(config_path)

    if path is None:
        logging.basicConfig(level=default_level, format="%(levelname)s - %(name)s - %(message)s")
        logging.getLogger("nearbest").debug("No logging config file found; using basicConfig")
        return

    with open(path, "r", encoding="utf-8") as f:
        config = json.load(f)
    logging.config.dictConfig(relocate_file_handlers(config, get_log_dir()))
    logging.getLogger("nearbest").debug(f"Logging configured from file: {path}")
