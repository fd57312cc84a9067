"""
Output helpers

All numeric tables are written with round-trip precision so that a rerun of
the same configuration produces byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from witten_rates.utils.exceptions import OutputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def ensure_dir(path: Union[str, Path]) -> Path:
    """Create a directory (and parents) if needed"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory {path}: {e}") from e
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Write a table as CSV with full round-trip precision

    Args:
        frame: Table to write
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    ensure_dir(path.parent)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


def write_manifest(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Write the run manifest JSON"""
    path = Path(path)
    ensure_dir(path.parent)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2, sort_keys=True)
            f.write("\n")
    except (OSError, TypeError) as e:
        raise OutputError(f"Cannot write manifest {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path
