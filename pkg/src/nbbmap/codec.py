"""Compact storage: pack the member cells of an embedded grid into the
orthotope, cell ``p`` going to ``lambda_inverse(p)``.

The compact grid is indexed ``[wy, wx]`` and flattens row-major (``wx``
fastest).  On disk it is a 16-byte header (``b"NBBC"``, then ``k``, ``s``,
``r_b`` as little-endian uint32) followed by ``k**r_b`` little-endian int64
values in that order.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from pathlib import Path

import numpy as np

from .blockmap import BlockGeometry, lambda_array
from .errors import ConfigError, ShapeError
from .fractal import FractalSpec, orthotope_dims

MAGIC = b"NBBC"
_HEADER = struct.Struct("<4sIII")


@lru_cache(maxsize=32)
def _gather_index(spec: FractalSpec, r_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Embedded ``(y, x)`` of every orthotope cell, as ``(H, W)`` arrays."""
    width, height = orthotope_dims(spec, r_b)
    wy, wx = np.mgrid[0:height, 0:width]
    x, y = lambda_array(spec, r_b, wx, wy)
    x.setflags(write=False)
    y.setflags(write=False)
    return y, x


def compact_store(spec: FractalSpec, geom: BlockGeometry, grid) -> np.ndarray:
    """Embedded ``(n_b, n_b)`` grid -> compact ``(H, W)`` orthotope grid."""
    grid = np.asarray(grid)
    n_b = spec.s**geom.r_b
    if grid.shape != (n_b, n_b):
        raise ShapeError(f"expected a {n_b}x{n_b} embedded grid, got {grid.shape}")
    ys, xs = _gather_index(spec, geom.r_b)
    return grid[ys, xs]


def compact_load(spec: FractalSpec, geom: BlockGeometry, compact, fill=0) -> np.ndarray:
    """Compact orthotope grid -> embedded grid; non-member cells get ``fill``."""
    compact = np.asarray(compact)
    width, height = orthotope_dims(spec, geom.r_b)
    if compact.shape != (height, width):
        raise ShapeError(f"expected a {height}x{width} compact grid, got {compact.shape}")
    n_b = spec.s**geom.r_b
    out = np.full((n_b, n_b), fill, dtype=compact.dtype)
    ys, xs = _gather_index(spec, geom.r_b)
    out[ys, xs] = compact
    return out


def save_compact(path, spec: FractalSpec, r_b: int, compact) -> None:
    compact = np.asarray(compact)
    width, height = orthotope_dims(spec, r_b)
    if compact.shape != (height, width):
        raise ShapeError(f"expected a {height}x{width} compact grid, got {compact.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, spec.k, spec.s, r_b))
        fh.write(compact.astype("<i8").tobytes(order="C"))


def load_compact(path, spec: FractalSpec | None = None) -> tuple[tuple[int, int, int], np.ndarray]:
    """Read a compact file; returns ``((k, s, r_b), grid)``.

    When ``spec`` is given its ``k`` and ``s`` must match the header.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ShapeError(f"{path}: truncated header")
    magic, k, s, r_b = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if spec is not None and (spec.k, spec.s) != (k, s):
        raise ConfigError(f"{path}: file holds k={k}, s={s}; spec {spec.name} has k={spec.k}, s={spec.s}")
    width, height = k ** ((r_b + 1) // 2), k ** (r_b // 2)
    body = data[_HEADER.size:]
    if len(body) != 8 * width * height:
        raise ShapeError(f"{path}: expected {width * height} values, found {len(body) // 8}")
    grid = np.frombuffer(body, dtype="<i8").astype(np.int64).reshape(height, width)
    return (k, s, r_b), grid
