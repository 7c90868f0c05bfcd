"""
File helpers

CSV traces and JSON reports shared by the command-line tools.
"""

import json
import math
import os
from pathlib import Path
from typing import Any, Dict, Sequence, Union

import numpy as np
from loguru import logger

from .errors import TraceError
from .sim import TRACE_COLUMNS

PathLike = Union[str, Path]


def _ensure_parent(path: Path) -> None:
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)


def write_trace(path: PathLike, table: np.ndarray, columns: Sequence[str] = TRACE_COLUMNS) -> Path:
    """Write rows with a header line and fixed nine-decimal formatting."""
    path = Path(path)
    _ensure_parent(path)
    np.savetxt(path, np.asarray(table, dtype=float), delimiter=",", header=",".join(columns), comments="", fmt="%.9f")
    logger.debug(f"Wrote {len(table)} rows to {path}")
    return path


def read_trace_table(path: PathLike) -> np.ndarray:
    """Read a simulator trace into an array with the standard column order."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except (OSError, ValueError) as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e
    data = np.atleast_1d(data)
    names = data.dtype.names or ()
    missing = [c for c in TRACE_COLUMNS if c not in names]
    if missing:
        raise TraceError(f"trace {path} lacks columns {missing}", help="Use a trace written by the simulate command.")
    return np.column_stack([np.asarray(data[c], dtype=float) for c in TRACE_COLUMNS])


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    path = Path(path)
    _ensure_parent(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote report {path}")
    return path


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=True)


def plot_data_paths(out: PathLike) -> Dict[str, Path]:
    """Per-figure CSV paths next to the trace: trajectory, barrier and slack."""
    out = Path(out)
    stem = out.with_suffix("")
    return {
        "trajectory": Path(f"{stem}_trajectory.csv"),
        "barrier": Path(f"{stem}_barrier.csv"),
        "slack": Path(f"{stem}_slack.csv"),
    }


def summary_path(out: PathLike) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}.summary.json")
