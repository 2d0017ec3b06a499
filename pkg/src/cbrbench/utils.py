"""Small shared helpers: seed derivation and text serialization of floats."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit seed from a tuple of hashable parts.

    Seeds for every sub-stream (dataset instances, grid points, splits, ...)
    are derived this way from the master seed, so results never depend on
    scheduling or call order.
    """
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def fmt_float(x: float) -> str:
    """Format a float with 17 significant digits (exact float64 round-trip)."""
    return format(float(x), ".17g")


def fmt_row(values) -> str:
    return " ".join(fmt_float(v) for v in values)


def array_to_lines(arr: np.ndarray) -> list[str]:
    a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    return [fmt_row(row) for row in a]


def lines_to_array(lines: list[str], rows: int, cols: int) -> np.ndarray:
    if len(lines) != rows:
        raise ValueError(f"expected {rows} rows, got {len(lines)}")
    out = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(lines):
        vals = line.split()
        if len(vals) != cols:
            raise ValueError(f"row {i}: expected {cols} values, got {len(vals)}")
        out[i] = [float(v) for v in vals]
    return out
