"""NBB fractal descriptors and brute-force ground-truth oracles.

A fractal of the Non-overlapping Bottom-up Boxes family is described by a
replica count ``k``, a linear scale factor ``s`` and a table of ``k``
distinct replica offsets inside the ``s x s`` step box.  Level ``r`` lives in
an ``s**r x s**r`` embedding and holds exactly ``k**r`` member cells.

Coordinates follow raster convention: ``x`` grows to the right, ``y`` grows
downwards, and arrays are indexed ``grid[y, x]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, RangeError, ResourceError

INT64_MAX = 2**63 - 1
DEFAULT_CELL_BUDGET = 1 << 24


@dataclass(frozen=True)
class FractalSpec:
    """Descriptor of one NBB fractal.

    ``offsets[i]`` is the ``(tx, ty)`` cell of replica ``i`` inside the step
    box; the replica numbering is the hash table used by the block map.
    """

    name: str
    k: int
    s: int
    offsets: tuple[tuple[int, int], ...]
    _inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = tuple((int(tx), int(ty)) for tx, ty in self.offsets)
        object.__setattr__(self, "offsets", offsets)
        if self.k < 2 or self.s < 2:
            raise ConfigError(f"{self.name}: need k >= 2 and s >= 2, got k={self.k}, s={self.s}")
        if self.k > self.s * self.s:
            raise ConfigError(f"{self.name}: k={self.k} replicas cannot fit in a {self.s}x{self.s} box")
        if len(offsets) != self.k:
            raise ConfigError(f"{self.name}: expected {self.k} offsets, got {len(offsets)}")
        if len(set(offsets)) != self.k:
            raise ConfigError(f"{self.name}: replica offsets overlap")
        inverse = np.full((self.s, self.s), -1, dtype=np.int64)
        for i, (tx, ty) in enumerate(offsets):
            if not (0 <= tx < self.s and 0 <= ty < self.s):
                raise ConfigError(f"{self.name}: offset {(tx, ty)} outside [0, {self.s - 1}]")
            inverse[ty, tx] = i
        inverse.setflags(write=False)
        object.__setattr__(self, "_inverse", inverse)

    @property
    def table(self) -> np.ndarray:
        """Offsets as a ``(k, 2)`` int64 array, columns ``(tx, ty)``."""
        return np.asarray(self.offsets, dtype=np.int64)

    @property
    def inverse_table(self) -> np.ndarray:
        """``(s, s)`` array indexed ``[ty, tx]`` giving the replica id, or -1."""
        return self._inverse

    def replica_at(self, tx: int, ty: int) -> int:
        return int(self._inverse[ty, tx])


SIERPINSKI = FractalSpec("sierpinski", 3, 2, ((0, 0), (0, 1), (1, 1)))
VICSEK = FractalSpec("vicsek", 5, 3, ((1, 1), (1, 0), (1, 2), (0, 1), (2, 1)))
CARPET = FractalSpec(
    "carpet", 8, 3, tuple((x, y) for y in range(3) for x in range(3) if (x, y) != (1, 1))
)

BUILTIN_SPECS = {spec.name: spec for spec in (SIERPINSKI, VICSEK, CARPET)}


def get_spec(name_or_path: str | Path) -> FractalSpec:
    """Return a built-in spec by name, or load one from a config file."""
    if isinstance(name_or_path, str) and name_or_path.lower() in BUILTIN_SPECS:
        return BUILTIN_SPECS[name_or_path.lower()]
    path = Path(name_or_path)
    if path.is_file():
        return load_spec(path)
    known = ", ".join(sorted(BUILTIN_SPECS))
    raise ConfigError(f"unknown spec {name_or_path!r} (built-ins: {known}; or pass a file path)")


def parse_spec(text: str) -> FractalSpec:
    """Parse the ``key=value`` spec format.

    Recognised keys are ``name``, ``k``, ``s`` and ``offset`` (repeated, as
    ``tx,ty``).  Blank lines and ``#`` comments are ignored.
    """
    name, k, s, offsets = None, None, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = key.strip().lower(), value.strip()
        try:
            if key == "name":
                name = value
            elif key == "k":
                k = int(value)
            elif key == "s":
                s = int(value)
            elif key == "offset":
                tx, ty = (int(v) for v in value.split(","))
                offsets.append((tx, ty))
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value {value!r}") from exc
    if name is None or k is None or s is None:
        raise ConfigError("spec needs name=, k= and s= lines")
    return FractalSpec(name, k, s, tuple(offsets))


def load_spec(path: str | Path) -> FractalSpec:
    return parse_spec(Path(path).read_text())


def format_spec(spec: FractalSpec) -> str:
    lines = [f"name={spec.name}", f"k={spec.k}", f"s={spec.s}"]
    lines += [f"offset={tx},{ty}" for tx, ty in spec.offsets]
    return "\n".join(lines) + "\n"


def _checked_pow(base: int, exp: int, what: str) -> int:
    if exp < 0:
        raise RangeError(f"negative scale level {exp}")
    value = base**exp
    if value > INT64_MAX:
        raise OverflowError(f"{what} {base}**{exp} exceeds the 64-bit integer range")
    return value


def scale_level(n: int, s: int) -> int:
    """Return ``r`` with ``s**r == n``; reject sizes that are not powers of ``s``."""
    if n < 1:
        raise ConfigError(f"linear size must be positive, got {n}")
    r, m = 0, n
    while m % s == 0:
        m //= s
        r += 1
    if m != 1:
        raise ConfigError(f"linear size {n} is not a power of {s}")
    return r


def side(spec: FractalSpec, r: int) -> int:
    """Linear size ``s**r`` of the level-``r`` embedding."""
    return _checked_pow(spec.s, r, "embedding side")


def volume(spec: FractalSpec, r: int) -> int:
    """Number of member cells at level ``r`` (``k**r``)."""
    return _checked_pow(spec.k, r, "volume")


def hausdorff(spec: FractalSpec) -> float:
    return math.log(spec.k) / math.log(spec.s)


def orthotope_dims(spec: FractalSpec, r: int) -> tuple[int, int]:
    """Width and height of the rectangle that packs level ``r`` exactly."""
    width = _checked_pow(spec.k, (r + 1) // 2, "orthotope width")
    height = _checked_pow(spec.k, r // 2, "orthotope height")
    if width * height > INT64_MAX:
        raise OverflowError(f"orthotope {width}x{height} exceeds the 64-bit integer range")
    return width, height


def is_member(spec: FractalSpec, x: int, y: int, r: int) -> bool:
    """Recursive-descent membership test, O(r)."""
    n = side(spec, r)
    if not (0 <= x < n and 0 <= y < n):
        raise RangeError(f"cell ({x}, {y}) outside the {n}x{n} embedding")
    inv = spec.inverse_table
    sub = n
    for _ in range(r):
        sub //= spec.s
        if inv[y // sub, x // sub] < 0:
            return False
        x %= sub
        y %= sub
    return True


def member_mask(spec: FractalSpec, xs, ys, r: int) -> np.ndarray:
    """Vectorised :func:`is_member` over coordinate arrays."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    n = side(spec, r)
    if xs.size and (xs.min() < 0 or ys.min() < 0 or xs.max() >= n or ys.max() >= n):
        raise RangeError(f"coordinates outside the {n}x{n} embedding")
    inv = spec.inverse_table
    ok = np.ones(np.broadcast(xs, ys).shape, dtype=bool)
    sub = n
    for _ in range(r):
        sub //= spec.s
        ok &= inv[ys // sub, xs // sub] >= 0
        xs = xs % sub
        ys = ys % sub
    return ok


def dense_mask(spec: FractalSpec, r: int) -> np.ndarray:
    """Boolean ``(n, n)`` membership image built by replication, indexed ``[y, x]``."""
    n = side(spec, r)
    if n * n > DEFAULT_CELL_BUDGET * 16:
        raise ResourceError(f"a {n}x{n} mask exceeds the memory budget")
    mask = np.ones((1, 1), dtype=bool)
    for _ in range(r):
        m = mask.shape[0]
        grown = np.zeros((m * spec.s, m * spec.s), dtype=bool)
        for tx, ty in spec.offsets:
            grown[ty * m:(ty + 1) * m, tx * m:(tx + 1) * m] = mask
        mask = grown
    return mask


def enumerate_cells(spec: FractalSpec, r: int, budget: int = DEFAULT_CELL_BUDGET) -> set[tuple[int, int]]:
    """Exact member set at level ``r``, generated by recursive replication."""
    if volume(spec, r) > budget:
        raise ResourceError(f"{spec.name} at r={r} has {spec.k**r} cells, budget is {budget}")
    cells = [(0, 0)]
    width = 1
    for _ in range(r):
        cells = [(tx * width + x, ty * width + y) for tx, ty in spec.offsets for x, y in cells]
        width *= spec.s
    return set(cells)


def cells_to_mask(cells: Iterable[tuple[int, int]], n: int) -> np.ndarray:
    mask = np.zeros((n, n), dtype=bool)
    for x, y in cells:
        mask[y, x] = True
    return mask
