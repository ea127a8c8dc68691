"""Dense matrix files.

Two formats, chosen by file extension:

* ``.csv`` -- comma-separated rows, no header;
* anything else -- plain text: a header line ``rows cols`` followed by the
  values in row-major order, whitespace separated (one matrix row per line).

Values are written with 17 significant digits, so reading a written file
gives back the same doubles bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionError

_FMT = "%.17g"


def _is_csv(path):
    return Path(path).suffix.lower() == ".csv"


def write_matrix(path, A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"can only write matrices, got ndim={A.ndim}")
    sep = "," if _is_csv(path) else " "
    lines = [] if _is_csv(path) else [f"{A.shape[0]} {A.shape[1]}"]
    lines.extend(sep.join(_FMT % v for v in row) for row in A)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    text = Path(path).read_text()
    if _is_csv(path):
        rows = [line.split(",") for line in text.splitlines() if line.strip()]
        if not rows:
            raise DimensionError(f"{path}: empty matrix file")
        width = len(rows[0])
        for i, row in enumerate(rows, start=1):
            if len(row) != width:
                raise DimensionError(f"{path}: line {i} has {len(row)} fields, expected {width}")
        return np.array([[float(v) for v in row] for row in rows], dtype=float)
    tokens = text.split()
    if len(tokens) < 2:
        raise DimensionError(f"{path}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise DimensionError(f"{path}: header must be two integers 'rows cols'") from None
    values = tokens[2:]
    if len(values) != rows * cols:
        raise DimensionError(f"{path}: header says {rows}x{cols} but found {len(values)} values")
    return np.array([float(v) for v in values], dtype=float).reshape(rows, cols)
