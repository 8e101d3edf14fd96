"""Binary embedding-matrix files shared by span and utterance embeddings.

Layout: magic b"SPEM", uint32 row count, uint32 column count (both
little-endian), then the row-major float32 little-endian body.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SPEM"
_HEADER = struct.Struct("<4sII")


def write_matrix(matrix: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    with Path(path).open("rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        body = fh.read(rows * cols * 4)
        if len(body) != rows * cols * 4:
            raise ValueError(f"{path}: truncated body")
    return np.frombuffer(body, dtype="<f4").reshape(rows, cols).copy()
