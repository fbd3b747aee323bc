import csv
import io
import json
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from filelock import FileLock, Timeout

from nearbest.config import get_lock_timeout
from nearbest.logger import get_logger, log_exception

FLOAT_FORMAT = "%.12e"


def format_cell(value: Any) -> str:
    """CSV cell text: floats in a fixed exponent format, NaN/None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return FLOAT_FORMAT % float(value)
    return str(value)


def parse_cell(text: str) -> float:
    return float(text) if text.strip() else float("nan")


class ResultStore:
    """
    Writes run outputs into one directory.

    Every write happens under a ``FileLock`` beside the target and goes to a
    temporary file that then replaces the target, so concurrent runs never
    see a half-written file.
    """

    def __init__(self, directory: str, timeout: Optional[float] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.directory = directory
        self.timeout = get_lock_timeout() if timeout is None else timeout
        os.makedirs(directory, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def _json_default(self, obj: Any) -> Any:
        """JSON fallback for numpy scalars/arrays and complex values ([re, im])."""
        if isinstance(obj, (complex, np.complexfloating)):
            return [float(obj.real), float(obj.imag)]
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return None if math.isnan(obj) else float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if hasattr(obj, "value"):
            return obj.value
        raise TypeError(f"Type {type(obj)} not serializable")

    def _write_text(self, name: str, text: str) -> str:
        target = self.path(name)
        lock = FileLock(target + ".lock", timeout=self.timeout)
        acquired = False
        try:
            lock.acquire()
            acquired = True
            tmp = target + ".tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp, target)
            self.logger.info(f"Wrote {target}")
        except Timeout:
            self.logger.error(f"Could not acquire lock for writing {target}")
            raise
        except Exception as e:
            log_exception(e, f"Failed to write {target}", self.logger)
            raise
        finally:
            if acquired:
                try:
                    lock.release()
                except Exception:
                    pass
                try:
                    os.remove(lock.lock_file)
                except (OSError, FileNotFoundError):
                    pass
        return target

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in header])
        return self._write_text(name, buffer.getvalue())

    def write_json(self, name: str, payload: Any) -> str:
        text = json.dumps(payload, indent=2, sort_keys=True, default=self._json_default, allow_nan=False)
        return self._write_text(name, text + "\n")


def _clean_nan(obj: Any) -> Any:
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean_nan(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_nan(v) for v in obj]
    return obj


def json_safe(payload: Any) -> Any:
    """Replace NaN floats by None so payloads serialize with allow_nan=False."""
    return _clean_nan(payload)


def read_csv(path: str) -> List[Dict[str, float]]:
    """Rows of a numeric CSV as dicts; empty cells read back as NaN."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        return [{k: parse_cell(v) for k, v in row.items()} for row in reader]
