"""Block-space thread map for NBB fractals.

A launch covers a packed rectangle of ``k**ceil(r_b/2) x k**floor(r_b/2)``
blocks.  Block ``omega`` is sent to an embedded block coordinate by summing
one replica offset per scale level: level ``mu`` reads a base-``k`` digit of
``omega_x`` (odd ``mu``) or ``omega_y`` (even ``mu``), looks the digit up in
the replica table and scales the offset by ``s**(mu-1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DomainError, RangeError
from .fractal import FractalSpec, member_mask, orthotope_dims, scale_level, volume


class LevelOffset(NamedTuple):
    mu: int
    beta: int
    tau: tuple[int, int]
    delta: tuple[int, int]


@dataclass(frozen=True)
class BlockGeometry:
    """Block edge ``rho`` over an ``n x n`` embedding.

    ``n_b = n // rho`` must itself be a power of ``s`` so that the coarsened
    fractal is again an NBB fractal of level ``r_b``.
    """

    rho: int
    n: int
    n_b: int
    r_b: int

    @classmethod
    def build(cls, spec: FractalSpec, n: int, rho: int = 1) -> "BlockGeometry":
        scale_level(n, spec.s)
        if rho < 1 or n % rho:
            raise ConfigError(f"block edge {rho} does not divide n={n}")
        n_b = n // rho
        return cls(rho=rho, n=n, n_b=n_b, r_b=scale_level(n_b, spec.s))

    @classmethod
    def from_level(cls, spec: FractalSpec, r_b: int, rho: int = 1) -> "BlockGeometry":
        """Geometry for a block-space level ``r_b`` with edge ``rho``."""
        n_b = spec.s**r_b
        return cls.build(spec, n_b * rho, rho)

    @property
    def threads_per_block(self) -> int:
        return self.rho * self.rho

    def local_level(self, spec: FractalSpec) -> int:
        """Level of the fractal inside one block; ``rho`` must be a power of ``s``."""
        return scale_level(self.rho, spec.s)


class IntraBlockStrategy(enum.Enum):
    FURTHER_UNROLLING = "unroll"
    SHARED_LOOKUP_TABLE = "lut"
    BOUNDING_SUB_BOXES = "subbox"

    @classmethod
    def parse(cls, value) -> "IntraBlockStrategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ConfigError(f"unknown intra-block strategy {value!r} (expected one of {names})") from None


def beta(spec: FractalSpec, omega: tuple[int, int], mu: int) -> int:
    """Replica selected by block ``omega`` at scale level ``mu`` (1-based)."""
    wx, wy = omega
    coord = wx * (mu % 2) + wy * ((mu + 1) % 2)
    return (coord // spec.k ** ((mu + 1) // 2 - 1)) % spec.k


def _check_omega(spec: FractalSpec, r_b: int, wx: int, wy: int):
    width, height = orthotope_dims(spec, r_b)
    if not (0 <= wx < width and 0 <= wy < height):
        raise RangeError(f"block ({wx}, {wy}) outside the {width}x{height} orthotope at r_b={r_b}")


def level_offsets(spec: FractalSpec, r_b: int, omega: tuple[int, int]) -> list[LevelOffset]:
    wx, wy = int(omega[0]), int(omega[1])
    _check_omega(spec, r_b, wx, wy)
    out = []
    for mu in range(1, r_b + 1):
        b = beta(spec, (wx, wy), mu)
        tx, ty = spec.offsets[b]
        scale = spec.s ** (mu - 1)
        out.append(LevelOffset(mu, b, (tx, ty), (tx * scale, ty * scale)))
    return out


def lambda_map(spec: FractalSpec, geom: BlockGeometry, omega: tuple[int, int]) -> tuple[int, int]:
    """Embedded block coordinate of orthotope block ``omega``."""
    return lambda_at_level(spec, geom.r_b, omega)


def lambda_at_level(spec: FractalSpec, r_b: int, omega: tuple[int, int]) -> tuple[int, int]:
    x = y = 0
    for lo in level_offsets(spec, r_b, omega):
        x += lo.delta[0]
        y += lo.delta[1]
    return x, y


def lambda_array(spec: FractalSpec, r_b: int, wx, wy) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised map over arrays of block coordinates (no range check)."""
    wx = np.asarray(wx, dtype=np.int64)
    wy = np.asarray(wy, dtype=np.int64)
    table = spec.table
    x = np.zeros(np.broadcast(wx, wy).shape, dtype=np.int64)
    y = np.zeros_like(x)
    digits_x, digits_y = wx.copy(), wy.copy()
    scale = 1
    for mu in range(1, r_b + 1):
        if mu % 2:
            b = digits_x % spec.k
            digits_x //= spec.k
        else:
            b = digits_y % spec.k
            digits_y //= spec.k
        x += table[b, 0] * scale
        y += table[b, 1] * scale
        scale *= spec.s
    return x, y


def lambda_inverse(spec: FractalSpec, geom: BlockGeometry, p: tuple[int, int]) -> tuple[int, int]:
    """Orthotope block that maps onto member block ``p``."""
    return lambda_inverse_at_level(spec, geom.r_b, p)


def lambda_inverse_at_level(spec: FractalSpec, r_b: int, p: tuple[int, int]) -> tuple[int, int]:
    x, y = int(p[0]), int(p[1])
    n_b = spec.s**r_b
    if not (0 <= x < n_b and 0 <= y < n_b):
        raise RangeError(f"cell ({x}, {y}) outside the {n_b}x{n_b} block space")
    wx = wy = 0
    sub = n_b
    for mu in range(r_b, 0, -1):
        sub //= spec.s
        b = spec.replica_at(x // sub, y // sub)
        if b < 0:
            raise DomainError(f"cell {tuple(p)} is not a member at r_b={r_b}")
        if mu % 2:
            wx += b * spec.k ** ((mu + 1) // 2 - 1)
        else:
            wy += b * spec.k ** (mu // 2 - 1)
        x %= sub
        y %= sub
    return wx, wy


def lambda_inverse_array(spec: FractalSpec, r_b: int, xs, ys) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised inverse; raises :class:`DomainError` if any cell is not a member."""
    xs = np.asarray(xs, dtype=np.int64).copy()
    ys = np.asarray(ys, dtype=np.int64).copy()
    inv = spec.inverse_table
    wx = np.zeros(np.broadcast(xs, ys).shape, dtype=np.int64)
    wy = np.zeros_like(wx)
    sub = spec.s**r_b
    for mu in range(r_b, 0, -1):
        sub //= spec.s
        b = inv[ys // sub, xs // sub]
        if (b < 0).any():
            raise DomainError(f"non-member cells passed to the inverse map at r_b={r_b}")
        if mu % 2:
            wx += b * spec.k ** ((mu + 1) // 2 - 1)
        else:
            wy += b * spec.k ** (mu // 2 - 1)
        xs %= sub
        ys %= sub
    return wx, wy


def sierpinski_arith_hash(b: int) -> tuple[int, int]:
    """Closed-form replica offset for the Sierpinski gasket numbering."""
    if b not in (0, 1, 2):
        raise DomainError(f"Sierpinski replica index must be 0, 1 or 2, got {b}")
    half = b // 2
    return half, b - half


def is_sierpinski(spec: FractalSpec) -> bool:
    return spec.k == 3 and spec.s == 2 and spec.offsets == ((0, 0), (0, 1), (1, 1))


def subbox_predicate(spec: FractalSpec, rho: int):
    """Membership predicate for a thread's local cell inside a ``rho x rho`` block.

    The gasket uses the bit test ``tx & (rho - 1 - ty) == 0``; other fractals
    fall back to recursive descent at the block's local level.
    """
    if is_sierpinski(spec):
        return lambda tx, ty: (np.asarray(tx) & (rho - 1 - np.asarray(ty))) == 0
    level = scale_level(rho, spec.s)
    return lambda tx, ty: member_mask(spec, tx, ty, level)


class LocalPattern(NamedTuple):
    """Per-thread resolution of one block, arrays of length ``rho**2``.

    Thread ``i`` has ``(tx, ty) = (i % rho, i // rho)``; ``active[i]`` says
    whether it lands on a member cell and ``(ox[i], oy[i])`` is its cell
    relative to the block origin (meaningful for active threads only).
    """

    tx: np.ndarray
    ty: np.ndarray
    active: np.ndarray
    ox: np.ndarray
    oy: np.ndarray


def _thread_ids(rho: int):
    ids = np.arange(rho * rho, dtype=np.int64)
    return ids, ids % rho, ids // rho


def unrolled_pattern(spec: FractalSpec, rho: int) -> LocalPattern:
    """Further unrolling: the block's threads form a linear pool; the first
    ``k**j`` of them walk the local orthotope and apply the map again."""
    j = scale_level(rho, spec.s)
    ids, tx, ty = _thread_ids(rho)
    width, _ = orthotope_dims(spec, j)
    active = ids < volume(spec, j)
    ox, oy = lambda_array(spec, j, ids % width, ids // width)
    return LocalPattern(tx, ty, active, np.where(active, ox, 0), np.where(active, oy, 0))


@lru_cache(maxsize=64)
def shared_lookup_table(spec: FractalSpec, rho: int) -> np.ndarray:
    """``(rho*rho, 2)`` read-only table of local cell offsets, ``-1`` for idle threads."""
    pat = unrolled_pattern(spec, rho)
    table = np.stack([np.where(pat.active, pat.ox, -1), np.where(pat.active, pat.oy, -1)], axis=1)
    table.setflags(write=False)
    return table


def lookup_pattern(spec: FractalSpec, rho: int) -> LocalPattern:
    table = shared_lookup_table(spec, rho)
    _, tx, ty = _thread_ids(rho)
    active = table[:, 0] >= 0
    return LocalPattern(tx, ty, active, np.maximum(table[:, 0], 0), np.maximum(table[:, 1], 0))


def subbox_pattern(spec: FractalSpec, rho: int) -> LocalPattern:
    _, tx, ty = _thread_ids(rho)
    active = np.asarray(subbox_predicate(spec, rho)(tx, ty), dtype=bool)
    return LocalPattern(tx, ty, active, tx.copy(), ty.copy())


def local_pattern(spec: FractalSpec, rho: int, strategy) -> LocalPattern:
    strategy = IntraBlockStrategy.parse(strategy)
    if strategy is IntraBlockStrategy.FURTHER_UNROLLING:
        return unrolled_pattern(spec, rho)
    if strategy is IntraBlockStrategy.SHARED_LOOKUP_TABLE:
        return lookup_pattern(spec, rho)
    return subbox_pattern(spec, rho)


def map_thread(
    spec: FractalSpec,
    geom: BlockGeometry,
    omega: tuple[int, int],
    t: tuple[int, int],
    strategy=IntraBlockStrategy.BOUNDING_SUB_BOXES,
) -> Optional[tuple[int, int]]:
    """Global embedded cell of thread ``t`` in block ``omega``, or ``None`` if idle."""
    tx, ty = int(t[0]), int(t[1])
    rho = geom.rho
    if not (0 <= tx < rho and 0 <= ty < rho):
        raise RangeError(f"thread ({tx}, {ty}) outside a {rho}x{rho} block")
    bx, by = lambda_map(spec, geom, omega)
    strategy = IntraBlockStrategy.parse(strategy)
    if strategy is IntraBlockStrategy.BOUNDING_SUB_BOXES:
        if not bool(subbox_predicate(spec, rho)(tx, ty)):
            return None
        return rho * bx + tx, rho * by + ty
    if strategy is IntraBlockStrategy.SHARED_LOOKUP_TABLE:
        ox, oy = shared_lookup_table(spec, rho)[ty * rho + tx]
        if ox < 0:
            return None
        return rho * bx + int(ox), rho * by + int(oy)
    j = geom.local_level(spec)
    i = ty * rho + tx
    if i >= volume(spec, j):
        return None
    width, _ = orthotope_dims(spec, j)
    ox, oy = lambda_at_level(spec, j, (i % width, i // width))
    return rho * bx + ox, rho * by + oy
