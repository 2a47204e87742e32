"""
Output encodings: JSON with complex numbers as {"re", "im"}, matrix and path CSV tables,
and the binary path format. All files are written atomically.
"""

from __future__ import annotations

import io
import json
import os
import uuid
from enum import Enum
from pathlib import Path
from typing import Any, Callable, IO

import numpy as np
import pandas as pd

from vgp_sim import SamplePaths


FLOAT_FORMAT = "%.17g"
HEADER = np.dtype("<i8")
VALUES = np.dtype("<c16")


class ExportError(Exception):
    pass


def _atomic_write(path: Path, mode: str, write: Callable[[IO], None]) -> None:
    path = Path(path)
    temporary = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        encoding = None if "b" in mode else "utf-8"
        newline = None if "b" in mode else ""
        with temporary.open(mode, encoding=encoding, newline=newline) as handle:
            write(handle)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temporary, path)
    except OSError as exc:
        raise ExportError(f"could not write {path}: {exc}") from exc
    finally:
        try:
            temporary.unlink(missing_ok=True)
        except OSError:
            pass


def atomic_write_text(path: Path, text: str) -> None:
    _atomic_write(path, "x", lambda handle: handle.write(text))


def atomic_write_bytes(path: Path, data: bytes) -> None:
    _atomic_write(path, "xb", lambda handle: handle.write(data))


# ==============================================================================
# JSON
# ==============================================================================
def encode(value: Any) -> Any:
    """Recursively convert numpy values, complex numbers and enums to JSON types."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [encode(item) for item in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(key): encode(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(item) for item in value]
    return value


def to_json(payload: Any) -> str:
    return json.dumps(encode(payload), indent=2, sort_keys=True) + "\n"


# ==============================================================================
# CSV tables
# ==============================================================================
def _complex_columns(values: np.ndarray) -> dict:
    columns = {}
    for k in range(values.shape[1]):
        columns[f"re_{k}"] = values[:, k].real
        columns[f"im_{k}"] = values[:, k].imag
    return columns


def matrix_frame(matrix: np.ndarray) -> pd.DataFrame:
    """Columns row, re_0, im_0, re_1, im_1, ..."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    frame = pd.DataFrame(_complex_columns(matrix))
    frame.insert(0, "row", np.arange(matrix.shape[0]))
    return frame


def paths_frame(paths: SamplePaths) -> pd.DataFrame:
    """Columns path, re_0, im_0, ... (one row per path; column k is X_{start+k})."""
    frame = pd.DataFrame(_complex_columns(paths.values))
    frame.insert(0, "path", np.arange(paths.count))
    return frame


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT)


def read_matrix_csv(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise ExportError(f"could not read {path}: {exc}") from exc
    order = (len(frame.columns) - 1) // 2
    return np.column_stack(
        [frame[f"re_{k}"].to_numpy() + 1j * frame[f"im_{k}"].to_numpy() for k in range(order)]
    )


# ==============================================================================
# Binary paths
# ==============================================================================
def paths_to_bytes(paths: SamplePaths) -> bytes:
    """Three little-endian int64 (N, n+1, seed) then N*(n+1) complex128 in path-major order."""
    buffer = io.BytesIO()
    header = np.array([paths.count, paths.values.shape[1], paths.seed], dtype=np.uint64).view(HEADER)
    buffer.write(header.tobytes())
    buffer.write(np.ascontiguousarray(paths.values, dtype=VALUES).tobytes())
    return buffer.getvalue()


def write_paths_binary(path: Path, paths: SamplePaths) -> None:
    atomic_write_bytes(path, paths_to_bytes(paths))


def read_paths_binary(path: Path) -> SamplePaths:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ExportError(f"could not read {path}: {exc}") from exc
    if len(data) < 3 * HEADER.itemsize:
        raise ExportError(f"{path}: truncated header")
    count, width, seed = np.frombuffer(data[: 3 * HEADER.itemsize], dtype=HEADER).view(np.uint64)
    body = np.frombuffer(data[3 * HEADER.itemsize :], dtype=VALUES)
    if body.size != int(count) * int(width):
        raise ExportError(f"{path}: expected {int(count) * int(width)} values, found {body.size}")
    return SamplePaths(body.reshape(int(count), int(width)).astype(complex), int(seed))
