"""Netpbm export (plain P1/P2 and raw P4/P5) and the render views."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .blockmap import beta, lambda_array
from .errors import ResourceError
from .fractal import FractalSpec, dense_mask, orthotope_dims, side

MAX_IMAGE_SIDE = 4096


def write_pbm(path, bits, plain: bool = True) -> None:
    """Write a bitmap; nonzero entries become 1 (black in PBM terms)."""
    bits = np.asarray(bits) != 0
    h, w = bits.shape
    with open(path, "wb") as fh:
        if plain:
            fh.write(f"P1\n{w} {h}\n".encode())
            for row in bits.astype(np.uint8):
                fh.write((" ".join(map(str, row)) + "\n").encode())
        else:
            fh.write(f"P4\n{w} {h}\n".encode())
            fh.write(np.packbits(bits, axis=1).tobytes())


def write_pgm(path, image, maxval: int | None = None, plain: bool = True) -> None:
    image = np.asarray(image, dtype=np.int64)
    h, w = image.shape
    maxval = int(image.max(initial=0)) if maxval is None else maxval
    maxval = max(maxval, 1)
    with open(path, "wb") as fh:
        if plain:
            fh.write(f"P2\n{w} {h}\n{maxval}\n".encode())
            for row in image:
                fh.write((" ".join(map(str, row)) + "\n").encode())
        else:
            if maxval > 65535:
                raise ValueError("PGM maxval is limited to 65535")
            dtype = ">u1" if maxval < 256 else ">u2"
            fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
            fh.write(np.clip(image, 0, maxval).astype(dtype).tobytes())


def read_pnm(path) -> np.ndarray:
    """Read a plain P1/P2 file back into an array (used for round-trip checks)."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    magic, w, h = tokens[0], int(tokens[1]), int(tokens[2])
    if magic == "P1":
        body = tokens[3:]
    elif magic == "P2":
        body = tokens[4:]
    else:
        raise ValueError(f"unsupported netpbm type {magic}")
    return np.array(body, dtype=np.int64).reshape(h, w)


def _check_budget(*sides: int):
    if max(sides) > MAX_IMAGE_SIDE:
        raise ResourceError(f"image side {max(sides)} exceeds the {MAX_IMAGE_SIDE}-pixel budget")


def render_fractal(spec: FractalSpec, r: int) -> np.ndarray:
    _check_budget(side(spec, r))
    return dense_mask(spec, r).astype(np.uint8)


def render_packing(spec: FractalSpec, r: int) -> np.ndarray:
    """Orthotope cells shaded by their top-level replica (``1..k``)."""
    width, height = orthotope_dims(spec, r)
    _check_budget(width, height)
    if r == 0:
        return np.ones((1, 1), dtype=np.int64)
    wy, wx = np.mgrid[0:height, 0:width]
    top = np.vectorize(lambda a, b: beta(spec, (a, b), r))(wx, wy)
    return top.astype(np.int64) + 1


def render_mapping(spec: FractalSpec, r: int) -> np.ndarray:
    """Orthotope (left) and embedding (right), cells shaded by ``omega`` parity.

    Values: 0 background, 1 even ``wx + wy``, 2 odd.
    """
    width, height = orthotope_dims(spec, r)
    n = side(spec, r)
    _check_budget(width + 1 + n, height, n)
    canvas = np.zeros((max(height, n), width + 1 + n), dtype=np.int64)
    wy, wx = np.mgrid[0:height, 0:width]
    shade = (wx + wy) % 2 + 1
    canvas[:height, :width] = shade
    x, y = lambda_array(spec, r, wx, wy)
    canvas[y, width + 1 + x] = shade
    return canvas
