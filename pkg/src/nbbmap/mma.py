"""Matrix-multiply-accumulate encodings of the block map.

The map is a sum of products ``sum_mu s**(mu-1) * tau^mu``, so it can be
evaluated as ``D = A @ B + C`` on 16x16 fragments: ``A`` carries the powers
of ``s`` in a row, ``B`` carries the per-level replica offsets in columns.

* Variant 1: one block per evaluation; ``D[0, 0:2]`` is the block coordinate.
* Variant 2: up to 8 sub-blocks per evaluation; pair ``i`` lands in
  ``D[0, 2i:2i+2]``.
* Variant 3: one evaluation per axis yields a global cell for each of the
  ``rho x rho`` threads; ``C`` holds the per-thread intra-block offsets.

Fragments are plain float64 ``(16, 16)`` arrays; all values are small
integers, so the arithmetic is exact.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .blockmap import BlockGeometry, IntraBlockStrategy, beta, local_pattern
from .errors import CapacityError, ConfigError, ShapeError
from .fractal import FractalSpec, orthotope_dims

FRAGMENT = 16
MAX_PAIRS = FRAGMENT // 2


def zero_fragment() -> np.ndarray:
    return np.zeros((FRAGMENT, FRAGMENT), dtype=np.float64)


def _check_fragment(frag: np.ndarray, name: str) -> np.ndarray:
    frag = np.asarray(frag, dtype=np.float64)
    if frag.shape[-2:] != (FRAGMENT, FRAGMENT):
        raise ShapeError(f"fragment {name} must be {FRAGMENT}x{FRAGMENT}, got {frag.shape}")
    return frag


def mma_eval(A, B, C=None) -> np.ndarray:
    """``D = A @ B + C``; leading batch dimensions broadcast."""
    A = _check_fragment(A, "A")
    B = _check_fragment(B, "B")
    D = np.matmul(A, B)
    if C is not None:
        D = D + _check_fragment(C, "C")
    return D


def _check_levels(r_b: int):
    if r_b > FRAGMENT:
        raise CapacityError(f"r_b={r_b} levels do not fit a {FRAGMENT}-wide fragment")


def power_row(spec: FractalSpec, r_b: int, scale: int = 1) -> np.ndarray:
    _check_levels(r_b)
    row = np.zeros(FRAGMENT, dtype=np.float64)
    row[:r_b] = [scale * spec.s**i for i in range(r_b)]
    return row


def _tau_columns(spec: FractalSpec, r_b: int, omega) -> tuple[np.ndarray, np.ndarray]:
    taus = np.array([spec.offsets[beta(spec, omega, mu)] for mu in range(1, r_b + 1)], dtype=np.float64)
    return taus.reshape(r_b, 2)[:, 0], taus.reshape(r_b, 2)[:, 1]


def _check_omega(spec: FractalSpec, r_b: int, omega):
    width, height = orthotope_dims(spec, r_b)
    wx, wy = omega
    if not (0 <= wx < width and 0 <= wy < height):
        raise ConfigError(f"block {tuple(omega)} outside the {width}x{height} orthotope")


def encode_variant1(spec: FractalSpec, geom: BlockGeometry, omega) -> tuple[np.ndarray, np.ndarray]:
    r_b = geom.r_b
    _check_levels(r_b)
    _check_omega(spec, r_b, omega)
    A, B = zero_fragment(), zero_fragment()
    A[0] = power_row(spec, r_b)
    B[:r_b, 0], B[:r_b, 1] = _tau_columns(spec, r_b, omega)
    return A, B


def decode_variant1(D) -> tuple[int, int]:
    return int(D[0, 0]), int(D[0, 1])


def subblock_active(spec: FractalSpec, geom: BlockGeometry, omegas) -> np.ndarray:
    """True for each sub-block coordinate lying inside the packed orthotope."""
    width, height = orthotope_dims(spec, geom.r_b)
    om = np.asarray(omegas, dtype=np.int64).reshape(-1, 2)
    return (om[:, 0] >= 0) & (om[:, 0] < width) & (om[:, 1] >= 0) & (om[:, 1] < height)


def encode_variant2(spec: FractalSpec, geom: BlockGeometry, omegas: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Pack up to 8 sub-block coordinates into one evaluation.

    ``geom`` describes the sub-block geometry (its ``rho`` is the sub-block
    edge).  Coordinates outside the orthotope are idle: their columns stay
    zero and :func:`subblock_active` reports them.
    """
    omegas = [tuple(int(v) for v in w) for w in omegas]
    if not 1 <= len(omegas) <= MAX_PAIRS:
        raise CapacityError(f"variant 2 packs 1..{MAX_PAIRS} sub-blocks, got {len(omegas)}")
    r_b = geom.r_b
    _check_levels(r_b)
    A, B = zero_fragment(), zero_fragment()
    A[0] = power_row(spec, r_b)
    for i, (w, ok) in enumerate(zip(omegas, subblock_active(spec, geom, omegas))):
        if ok:
            B[:r_b, 2 * i], B[:r_b, 2 * i + 1] = _tau_columns(spec, r_b, w)
    return A, B


def decode_variant2(D, count: int) -> list[tuple[int, int]]:
    return [(int(D[0, 2 * i]), int(D[0, 2 * i + 1])) for i in range(count)]


def encode_variant3(spec: FractalSpec, geom: BlockGeometry, omega, rho: int = FRAGMENT, strategy=IntraBlockStrategy.BOUNDING_SUB_BOXES):
    """Per-thread encoding: returns ``(A, Bx, Cx, By, Cy)``.

    Fragment cell ``(i, j)`` belongs to thread ``(tx, ty) = (i, j)``.  ``A``
    rows hold ``rho * s**(mu-1)`` so that ``A @ B`` is the scaled block
    origin; ``C`` adds the thread's offset inside the block.  Blocks smaller
    than 16 occupy the top-left ``rho x rho`` corner, the rest is zero.
    """
    if geom.rho != rho:
        raise ConfigError(f"geometry has rho={geom.rho}, encoding asked for rho={rho}")
    if rho > FRAGMENT:
        raise ConfigError(f"variant 3 needs rho <= {FRAGMENT}, got {rho}")
    r_b = geom.r_b
    _check_levels(r_b)
    _check_omega(spec, r_b, omega)
    A = zero_fragment()
    A[:rho] = power_row(spec, r_b, scale=rho)
    Bx, By = zero_fragment(), zero_fragment()
    tau_x, tau_y = _tau_columns(spec, r_b, omega)
    Bx[:r_b, :rho] = tau_x[:, None]
    By[:r_b, :rho] = tau_y[:, None]
    Cx, Cy = thread_offset_fragments(spec, rho, strategy)
    return A, Bx, Cx, By, Cy


def thread_offset_fragments(spec: FractalSpec, rho: int, strategy=IntraBlockStrategy.BOUNDING_SUB_BOXES):
    pat = local_pattern(spec, rho, strategy)
    Cx, Cy = zero_fragment(), zero_fragment()
    Cx[pat.tx, pat.ty] = pat.ox
    Cy[pat.tx, pat.ty] = pat.oy
    return Cx, Cy


def variant2_launch_dims(spec: FractalSpec, r_b: int) -> tuple[int, int]:
    """Grid of 2x2 sub-block groups covering the orthotope rounded up to even sides."""
    width, height = orthotope_dims(spec, r_b)
    return -(-width // 2), -(-height // 2)


def variant2_inactive_count(spec: FractalSpec, r_b: int) -> int:
    gw, gh = variant2_launch_dims(spec, r_b)
    width, height = orthotope_dims(spec, r_b)
    return 4 * gw * gh - width * height


# Batched forms used by the dispatch engine.  Each returns integer arrays.

def _tau_stack(spec: FractalSpec, r_b: int, wx, wy) -> tuple[np.ndarray, np.ndarray]:
    """``(m, r_b)`` replica offsets per level for arrays of blocks."""
    wx = np.asarray(wx, dtype=np.int64)
    wy = np.asarray(wy, dtype=np.int64)
    table = spec.table
    tx = np.zeros((wx.size, r_b), dtype=np.float64)
    ty = np.zeros_like(tx)
    for mu in range(1, r_b + 1):
        coord = wx if mu % 2 else wy
        b = (coord // spec.k ** ((mu + 1) // 2 - 1)) % spec.k
        tx[:, mu - 1] = table[b, 0]
        ty[:, mu - 1] = table[b, 1]
    return tx, ty


def variant1_batch(spec: FractalSpec, r_b: int, wx, wy) -> tuple[np.ndarray, np.ndarray]:
    _check_levels(r_b)
    m = np.size(wx)
    A = zero_fragment()
    A[0] = power_row(spec, r_b)
    B = np.zeros((m, FRAGMENT, FRAGMENT))
    B[:, :r_b, 0], B[:, :r_b, 1] = _tau_stack(spec, r_b, wx, wy)
    D = mma_eval(A, B)
    return D[:, 0, 0].astype(np.int64), D[:, 0, 1].astype(np.int64)


def variant2_batch(spec: FractalSpec, r_b: int, gx, gy):
    """Map 2x2 sub-block groups; returns ``(wx, wy, active, x, y)`` of shape ``(m, 4)``.

    Sub-block ``i`` of group ``(gx, gy)`` is ``(2gx + i % 2, 2gy + i // 2)``.
    """
    _check_levels(r_b)
    gx = np.asarray(gx, dtype=np.int64)
    gy = np.asarray(gy, dtype=np.int64)
    m = gx.size
    width, height = orthotope_dims(spec, r_b)
    sub = np.arange(4)
    wx = 2 * gx[:, None] + sub[None, :] % 2
    wy = 2 * gy[:, None] + sub[None, :] // 2
    active = (wx < width) & (wy < height)
    tx, ty = _tau_stack(spec, r_b, np.where(active, wx, 0).ravel(), np.where(active, wy, 0).ravel())
    keep = active.ravel()[:, None]
    tx, ty = (tx * keep).reshape(m, 4, r_b), (ty * keep).reshape(m, 4, r_b)
    A = zero_fragment()
    A[0] = power_row(spec, r_b)
    B = np.zeros((m, FRAGMENT, FRAGMENT))
    B[:, :r_b, 0:8:2] = tx.transpose(0, 2, 1)
    B[:, :r_b, 1:8:2] = ty.transpose(0, 2, 1)
    D = mma_eval(A, B)
    x = D[:, 0, 0:8:2].astype(np.int64)
    y = D[:, 0, 1:8:2].astype(np.int64)
    return wx, wy, active, x, y


def variant3_batch(spec: FractalSpec, r_b: int, rho: int, wx, wy, strategy) -> tuple[np.ndarray, np.ndarray]:
    """Global cells for every thread of each block, shape ``(m, rho*rho)``.

    Column ``i`` is thread ``(i % rho, i // rho)``, matching
    :class:`~nbbmap.blockmap.LocalPattern` ordering.
    """
    if rho > FRAGMENT:
        raise ConfigError(f"variant 3 needs rho <= {FRAGMENT}, got {rho}")
    _check_levels(r_b)
    m = np.size(wx)
    A = zero_fragment()
    A[:rho] = power_row(spec, r_b, scale=rho)
    tx, ty = _tau_stack(spec, r_b, wx, wy)
    Bx = np.zeros((m, FRAGMENT, FRAGMENT))
    By = np.zeros_like(Bx)
    Bx[:, :r_b, :rho] = tx[:, :, None]
    By[:, :r_b, :rho] = ty[:, :, None]
    Cx, Cy = thread_offset_fragments(spec, rho, strategy)
    Dx = mma_eval(A, Bx, Cx)[:, :rho, :rho]
    Dy = mma_eval(A, By, Cy)[:, :rho, :rho]
    # fragment is [tx, ty]; flatten thread-major as ty * rho + tx
    return (
        Dx.transpose(0, 2, 1).reshape(m, rho * rho).astype(np.int64),
        Dy.transpose(0, 2, 1).reshape(m, rho * rho).astype(np.int64),
    )
