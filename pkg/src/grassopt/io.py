"""Matrix and metadata persistence.

Two matrix formats are supported:

* CSV: row-major, one matrix row per line, comma separated, no header.
  Values are written with 17 significant digits so they round-trip exactly.
* GRMX: little-endian binary container. Layout::

      bytes 0-3   magic b"GRMX"
      bytes 4-7   u32 rows
      bytes 8-11  u32 cols
      bytes 12-   rows*cols f64 values, row-major

JSON sidecars are written with sorted keys and a trailing newline so identical
content gives identical bytes. All writers are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"GRMX"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """File content does not follow the expected container layout."""


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _as_2d(mat) -> np.ndarray:
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {a.shape}")
    return a


def grmx_bytes(mat) -> bytes:
    a = _as_2d(mat)
    rows, cols = a.shape
    return _HEADER.pack(MAGIC, rows, cols) + np.ascontiguousarray(a, dtype="<f8").tobytes()


def parse_grmx(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("truncated GRMX header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise FormatError(f"GRMX payload has {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(float)


def write_grmx(path, mat):
    atomic_write_bytes(path, grmx_bytes(mat))


def read_grmx(path) -> np.ndarray:
    return parse_grmx(Path(path).read_bytes())


def csv_text(mat) -> str:
    a = _as_2d(mat)
    return "".join(",".join(format(v, ".17g") for v in row) + "\n" for row in a)


def write_csv_matrix(path, mat):
    atomic_write_text(path, csv_text(mat))


def read_csv_matrix(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([[float(v) for v in ln.split(",")] for ln in lines], dtype=float)


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write_text(path, json_text(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def pgm_bytes(image, side: int) -> bytes:
    """8-bit binary PGM of a lexicographically ordered image, min-max normalized."""
    a = np.asarray(image, dtype=float).reshape(side, side)
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)
    pixels = np.round(255 * scaled).astype(np.uint8)
    return f"P5\n{side} {side}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path, image, side: int):
    atomic_write_bytes(path, pgm_bytes(image, side))
