"""Binary field snapshots (STQGFLD1).

Layout: a 32-byte ASCII header ``"STQGFLD1 nx ny lx ly"`` padded with
spaces, then ``nx * ny`` little-endian float64 values in row-major order
(axis 0 is x).
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from .grid import Field, TorusSpec

MAGIC = "STQGFLD1"
HEADER_SIZE = 32
_DTYPE = np.dtype("<f8")


class SnapshotError(ValueError):
    """Malformed or unreadable snapshot file."""


def _format_length(v: float) -> str:
    return f"{v:.6g}"


def _snap_length(v: float) -> float:
    # lengths are written with 6 significant digits; recover multiples of pi/4
    quarter = math.pi / 4
    n = round(v / quarter)
    if n > 0 and abs(v - n * quarter) <= 1e-6 * abs(v):
        return n * quarter
    return v


def encode_header(spec: TorusSpec) -> bytes:
    text = " ".join([MAGIC, str(spec.nx), str(spec.ny),
                     _format_length(spec.length_x), _format_length(spec.length_y)])
    if len(text) > HEADER_SIZE:
        raise SnapshotError(f"header {text!r} exceeds {HEADER_SIZE} bytes")
    return text.ljust(HEADER_SIZE).encode("ascii")


def decode_header(raw: bytes) -> TorusSpec:
    if len(raw) < HEADER_SIZE:
        raise SnapshotError("truncated header")
    try:
        parts = raw[:HEADER_SIZE].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise SnapshotError("header is not ASCII") from exc
    if len(parts) != 5 or parts[0] != MAGIC:
        raise SnapshotError(f"bad header {raw[:HEADER_SIZE]!r}")
    try:
        nx, ny = int(parts[1]), int(parts[2])
        lx, ly = float(parts[3]), float(parts[4])
    except ValueError as exc:
        raise SnapshotError(f"bad header {raw[:HEADER_SIZE]!r}") from exc
    try:
        return TorusSpec(nx, ny, _snap_length(lx), _snap_length(ly))
    except ValueError as exc:
        raise SnapshotError(str(exc)) from exc


def to_bytes(field: Field) -> bytes:
    return encode_header(field.spec) + np.ascontiguousarray(field.values, dtype=_DTYPE).tobytes()


def from_bytes(raw: bytes) -> Field:
    spec = decode_header(raw)
    body = raw[HEADER_SIZE:]
    expected = spec.nx * spec.ny * _DTYPE.itemsize
    if len(body) != expected:
        raise SnapshotError(f"payload has {len(body)} bytes, expected {expected}")
    values = np.frombuffer(body, dtype=_DTYPE).reshape(spec.shape).astype(float)
    if not np.all(np.isfinite(values)):
        raise SnapshotError("payload contains non-finite values")
    return Field(spec, values)


def write_field(path: str | os.PathLike, field: Field) -> None:
    Path(path).write_bytes(to_bytes(field))


def read_field(path: str | os.PathLike) -> Field:
    return from_bytes(Path(path).read_bytes())


def state_paths(stem: str | os.PathLike) -> tuple[Path, Path]:
    """``<stem>_b.fld`` and ``<stem>_q.fld``."""
    stem = Path(stem)
    return stem.with_name(stem.name + "_b.fld"), stem.with_name(stem.name + "_q.fld")


def write_state(stem: str | os.PathLike, state) -> tuple[Path, Path]:
    pb, pq = state_paths(stem)
    write_field(pb, state.b)
    write_field(pq, state.q)
    return pb, pq
