"""Virtual dispatch engine with exact work accounting.

:func:`launch` walks every block of a launch grid, resolves which threads
land on member cells, and hands the active threads to a kernel in batches.
Two launch grids are supported:

``BOUNDING_BOX``
    the full ``n_b x n_b`` box of blocks; every thread tests membership of
    its own cell and idle threads retire.
``LAMBDA``
    the packed orthotope of ``k**r_b`` blocks, each placed by the block map
    (evaluated directly or through one of the MMA encodings).

Blocks are grouped into fixed-size chunks that may run on a thread pool.
Chunk boundaries do not depend on the worker count, no two blocks write the
same cell, and per-block partial results are merged by a fixed pairwise
tree, so results are identical for any number of workers.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import mma
from .blockmap import BlockGeometry, IntraBlockStrategy, lambda_array, local_pattern
from .codec import compact_store
from .errors import ConfigError, LaunchError
from .fractal import FractalSpec, dense_mask, orthotope_dims, scale_level, side, volume

ALLOWED_RHO = (1, 2, 4, 8, 16, 32)
CHUNK_THREADS = 1 << 16


class Mode(enum.Enum):
    BOUNDING_BOX = "bb"
    LAMBDA = "lambda"


class Backend(enum.Enum):
    DIRECT = "direct"
    MMA_V1 = "mma1"
    MMA_V2 = "mma2"
    MMA_V3 = "mma3"


def _parse(enum_cls, value):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        names = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"unknown {enum_cls.__name__.lower()} {value!r} (expected one of {names})") from None


@dataclass(frozen=True)
class DispatchConfig:
    """One launch: fractal, level, block edge, launch grid and map flavour.

    With the ``mma2`` backend ``rho`` is the edge of the mapped sub-block;
    each launched block groups 2x2 sub-blocks and is ``2*rho`` threads wide.
    """

    spec: FractalSpec
    r: int
    rho: int = 1
    mode: Mode = Mode.LAMBDA
    strategy: IntraBlockStrategy = IntraBlockStrategy.BOUNDING_SUB_BOXES
    backend: Backend = Backend.DIRECT

    def __post_init__(self):
        object.__setattr__(self, "mode", _parse(Mode, self.mode))
        object.__setattr__(self, "backend", _parse(Backend, self.backend))
        object.__setattr__(self, "strategy", IntraBlockStrategy.parse(self.strategy))
        if self.r < 0:
            raise ConfigError(f"scale level must be >= 0, got {self.r}")
        if self.rho not in ALLOWED_RHO:
            raise ConfigError(f"rho must be one of {ALLOWED_RHO}, got {self.rho}")
        n = side(self.spec, self.r)
        if n % self.rho:
            raise ConfigError(f"rho={self.rho} does not divide n={n}")
        if self.mode is Mode.LAMBDA:
            if self.rho != self.spec.s ** _exact_log(self.rho, self.spec.s):
                raise ConfigError(f"lambda mode needs rho to be a power of s={self.spec.s}, got {self.rho}")
            r_b = self.geometry.r_b
            if self.backend is not Backend.DIRECT and r_b > mma.FRAGMENT:
                raise ConfigError(f"r_b={r_b} exceeds the {mma.FRAGMENT}-level fragment capacity")
            if self.backend is Backend.MMA_V3 and self.rho > mma.FRAGMENT:
                raise ConfigError(f"mma3 supports rho <= {mma.FRAGMENT}, got {self.rho}")

    @property
    def n(self) -> int:
        return side(self.spec, self.r)

    @property
    def geometry(self) -> BlockGeometry:
        return BlockGeometry.build(self.spec, self.n, self.rho)

    def label(self) -> str:
        return (f"{self.spec.name} r={self.r} rho={self.rho} {self.mode.value}"
                f"/{self.strategy.value}/{self.backend.value}")


def _exact_log(n: int, s: int) -> int:
    try:
        return scale_level(n, s)
    except ConfigError:
        return -1


CSV_FIELDS = ("spec", "r", "rho", "mode", "strategy", "backend", "blocks", "threads",
              "active", "wasted", "map_ops", "micros")


@dataclass
class WorkReport:
    """Counters for one launch.

    ``map_ops`` counts map arithmetic: one membership test per thread in
    bounding-box mode; in lambda mode three operations (digit, table read,
    scaled add) per level per mapped block plus the intra-block cost (one
    predicate or table read per thread, or three per level for each
    unrolled thread).  ``micros`` is informational wall time.
    """

    spec: str
    r: int
    rho: int
    mode: str
    strategy: str
    backend: str
    blocks: int = 0
    threads: int = 0
    active: int = 0
    wasted: int = 0
    map_ops: int = 0
    micros: int = 0
    subblocks_inactive: int = 0
    r_b: int = 0
    value: Optional[int] = None

    def csv_row(self, timing: bool = True) -> list:
        return [getattr(self, f) if (f != "micros" or timing) else 0 for f in CSV_FIELDS]


class ThreadBatch(NamedTuple):
    """Active threads of a run of consecutive blocks, sorted by block.

    ``block`` is the launch-order index of the thread's block, ``(bx, by)``
    its block coordinate in the launch grid, ``(tx, ty)`` the thread inside
    the launched block and ``(x, y)`` the embedded cell.
    """

    block: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    x: np.ndarray
    y: np.ndarray


Kernel = Callable[[ThreadBatch], Optional[np.ndarray]]


def tree_sum(values) -> int:
    """Pairwise reduction in a fixed left-to-right tree."""
    vals = [int(v) for v in np.asarray(values, dtype=np.int64).ravel()]
    if not vals:
        return 0
    while len(vals) > 1:
        paired = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            paired.append(vals[-1])
        vals = paired
    return vals[0]


class _Plan:
    """Launch geometry shared by all chunks of one launch."""

    def __init__(self, config: DispatchConfig):
        self.config = config
        spec, rho = config.spec, config.rho
        self.lambda_mode = config.mode is Mode.LAMBDA
        if not self.lambda_mode:
            self.n_b = config.n // rho
            self.grid_w, self.grid_h = self.n_b, self.n_b
            self.launch_edge = rho
            return
        geom = config.geometry
        self.r_b = geom.r_b
        self.pattern = local_pattern(spec, rho, config.strategy)
        self.act_tx = self.pattern.tx[self.pattern.active]
        self.act_ty = self.pattern.ty[self.pattern.active]
        self.act_ox = self.pattern.ox[self.pattern.active]
        self.act_oy = self.pattern.oy[self.pattern.active]
        self.act_ids = np.flatnonzero(self.pattern.active)
        if config.strategy is IntraBlockStrategy.FURTHER_UNROLLING:
            self.intra_ops = 3 * scale_level(rho, spec.s) * int(self.pattern.active.sum())
        else:
            self.intra_ops = rho * rho
        if config.backend is Backend.MMA_V2:
            self.grid_w, self.grid_h = mma.variant2_launch_dims(spec, self.r_b)
            self.launch_edge = 2 * rho
        else:
            self.grid_w, self.grid_h = orthotope_dims(spec, self.r_b)
            self.launch_edge = rho

    @property
    def units(self) -> int:
        return self.grid_w * self.grid_h

    @property
    def chunk_blocks(self) -> int:
        return max(1, CHUNK_THREADS // (self.launch_edge**2))


class _ChunkResult(NamedTuple):
    threads: int
    active: int
    map_ops: int
    subblocks_inactive: int
    partials: Optional[np.ndarray]


def _bb_threads(plan: _Plan, units: np.ndarray):
    config = plan.config
    rho = config.rho
    bx, by = units % plan.grid_w, units // plan.grid_w
    t = np.arange(rho * rho, dtype=np.int64)
    tx, ty = np.broadcast_to(t % rho, (units.size, rho * rho)), np.broadcast_to(t // rho, (units.size, rho * rho))
    x = bx[:, None] * rho + tx
    y = by[:, None] * rho + ty
    active = dense_mask_cached(config.spec, config.r)[y, x]
    block = np.broadcast_to(units[:, None], x.shape)
    sel = active.ravel()
    cols = [a.ravel()[sel] for a in (block, np.broadcast_to(bx[:, None], x.shape),
                                     np.broadcast_to(by[:, None], x.shape), tx, ty, x, y)]
    threads = units.size * rho * rho
    return ThreadBatch(*cols), threads, threads, 0


def _lambda_threads(plan: _Plan, units: np.ndarray):
    config = plan.config
    spec, rho, r_b = config.spec, config.rho, plan.r_b
    backend = config.backend
    n_act = plan.act_ids.size
    per_block_ops = 3 * r_b + plan.intra_ops
    if backend is Backend.MMA_V2:
        gx, gy = units % plan.grid_w, units // plan.grid_w
        wx, wy, sub_active, ox, oy = mma.variant2_batch(spec, r_b, gx, gy)
        sub = np.arange(4)
        # (units, 4 sub-blocks, active threads)
        shape = (units.size, 4, n_act)
        keep = np.broadcast_to(sub_active[:, :, None], shape).ravel()
        block = np.broadcast_to(units[:, None, None], shape).ravel()[keep]
        bx = np.broadcast_to(gx[:, None, None], shape).ravel()[keep]
        by = np.broadcast_to(gy[:, None, None], shape).ravel()[keep]
        tx = ((sub % 2)[None, :, None] * rho + plan.act_tx[None, None, :])
        ty = ((sub // 2)[None, :, None] * rho + plan.act_ty[None, None, :])
        tx = np.broadcast_to(tx, shape).ravel()[keep]
        ty = np.broadcast_to(ty, shape).ravel()[keep]
        x = (rho * ox[:, :, None] + plan.act_ox[None, None, :]).ravel()[keep]
        y = (rho * oy[:, :, None] + plan.act_oy[None, None, :]).ravel()[keep]
        mapped = int(sub_active.sum())
        threads = units.size * 4 * rho * rho
        batch = ThreadBatch(block, bx, by, tx, ty, x, y)
        return batch, threads, mapped * per_block_ops, 4 * units.size - mapped
    wx, wy = units % plan.grid_w, units // plan.grid_w
    shape = (units.size, n_act)
    if backend is Backend.MMA_V3:
        gx, gy = mma.variant3_batch(spec, r_b, rho, wx, wy, config.strategy)
        x, y = gx[:, plan.act_ids], gy[:, plan.act_ids]
    else:
        if backend is Backend.MMA_V1:
            ox, oy = mma.variant1_batch(spec, r_b, wx, wy)
        else:
            ox, oy = lambda_array(spec, r_b, wx, wy)
        x = rho * ox[:, None] + plan.act_ox[None, :]
        y = rho * oy[:, None] + plan.act_oy[None, :]
    batch = ThreadBatch(
        np.broadcast_to(units[:, None], shape).ravel(),
        np.broadcast_to(wx[:, None], shape).ravel(),
        np.broadcast_to(wy[:, None], shape).ravel(),
        np.broadcast_to(plan.act_tx[None, :], shape).ravel(),
        np.broadcast_to(plan.act_ty[None, :], shape).ravel(),
        np.ascontiguousarray(x).ravel(),
        np.ascontiguousarray(y).ravel(),
    )
    return batch, units.size * rho * rho, units.size * per_block_ops, 0


_MASKS: dict = {}


def dense_mask_cached(spec: FractalSpec, r: int) -> np.ndarray:
    key = (spec, r)
    mask = _MASKS.get(key)
    if mask is None:
        mask = dense_mask(spec, r)
        mask.setflags(write=False)
        if len(_MASKS) > 16:
            _MASKS.clear()
        _MASKS[key] = mask
    return mask


def _run_chunk(plan: _Plan, kernel: Optional[Kernel], start: int, stop: int) -> _ChunkResult:
    units = np.arange(start, stop, dtype=np.int64)
    if plan.lambda_mode:
        batch, threads, map_ops, idle_sub = _lambda_threads(plan, units)
    else:
        batch, threads, map_ops, idle_sub = _bb_threads(plan, units)
    partials = None
    if kernel is not None:
        try:
            values = kernel(batch)
        except Exception as exc:
            raise _wrap_kernel_error(plan, batch, exc) from exc
        if values is not None:
            partials = np.zeros(stop - start, dtype=np.int64)
            np.add.at(partials, batch.block - start, np.asarray(values, dtype=np.int64))
    return _ChunkResult(threads, int(batch.x.size), map_ops, idle_sub, partials)


def _wrap_kernel_error(plan: _Plan, batch: ThreadBatch, exc: Exception) -> LaunchError:
    cell = getattr(exc, "cell", None)
    label = plan.config.label()
    if cell is not None:
        hit = np.flatnonzero((batch.x == cell[0]) & (batch.y == cell[1]))
        if hit.size:
            i = hit[0]
            block = (int(batch.bx[i]), int(batch.by[i]))
            thread = (int(batch.tx[i]), int(batch.ty[i]))
            return LaunchError(f"kernel failed in block {block} thread {thread} ({label}): {exc}", block, thread)
    if batch.block.size:
        first = (int(batch.bx[0]), int(batch.by[0]))
        last = (int(batch.bx[-1]), int(batch.by[-1]))
        return LaunchError(f"kernel failed in blocks {first}..{last} ({label}): {exc}", first)
    return LaunchError(f"kernel failed ({label}): {exc}")


def launch(config: DispatchConfig, kernel: Optional[Kernel] = None, workers: int = 1) -> WorkReport:
    """Run ``kernel`` over every active thread of the launch described by ``config``.

    If the kernel returns per-thread integer values, they are summed per
    block and the block partials are tree-reduced into ``report.value``.
    """
    started = time.perf_counter_ns()
    plan = _Plan(config)
    step = plan.chunk_blocks
    bounds = [(lo, min(lo + step, plan.units)) for lo in range(0, plan.units, step)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _run_chunk(plan, kernel, *b), bounds))
    else:
        results = [_run_chunk(plan, kernel, lo, hi) for lo, hi in bounds]
    threads = sum(res.threads for res in results)
    active = sum(res.active for res in results)
    map_ops = sum(res.map_ops for res in results)
    partials = [res.partials for res in results if res.partials is not None]
    value = tree_sum(np.concatenate(partials)) if partials else None
    return WorkReport(
        spec=config.spec.name, r=config.r, rho=config.rho, mode=config.mode.value,
        strategy=config.strategy.value if plan.lambda_mode else "none",
        backend=config.backend.value if plan.lambda_mode else "none",
        blocks=plan.units, threads=threads, active=active, wasted=threads - active,
        map_ops=map_ops, micros=(time.perf_counter_ns() - started) // 1000,
        subblocks_inactive=sum(res.subblocks_inactive for res in results),
        r_b=plan.r_b if plan.lambda_mode else 0, value=value,
    )


def work_quotient(report_bb: WorkReport, report_lambda: WorkReport, weighted: bool = False) -> float:
    """Bounding-box threads over lambda threads for the same fractal, level and block edge.

    ``weighted`` charges each lambda thread one map step per block-space
    level (at least one), against a constant cost per bounding-box thread.
    """
    if (report_bb.spec, report_bb.r, report_bb.rho) != (report_lambda.spec, report_lambda.r, report_lambda.rho):
        raise ConfigError("work_quotient needs reports for the same spec, r and rho")
    if report_bb.mode != Mode.BOUNDING_BOX.value or report_lambda.mode != Mode.LAMBDA.value:
        raise ConfigError("work_quotient expects a bounding-box report and a lambda report")
    cost = max(1, report_lambda.r_b) if weighted else 1
    return report_bb.threads / (cost * report_lambda.threads)


# -- grids and workloads -----------------------------------------------------

class LifeRule(NamedTuple):
    birth: frozenset = frozenset({3})
    survive: frozenset = frozenset({2, 3})


CONWAY = LifeRule()


class Grid:
    """Cell values over the ``s**r x s**r`` embedding, indexed ``[y, x]``.

    Non-member cells hold ``empty`` and are never written by the workloads.
    A second buffer is allocated on demand for double-buffered updates.
    """

    def __init__(self, spec: FractalSpec, r: int, data=None, empty: int = 0):
        self.spec = spec
        self.r = r
        self.empty = empty
        n = side(spec, r)
        if data is None:
            data = np.full((n, n), empty, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.int64)
        if self.data.shape != (n, n):
            raise ConfigError(f"grid must be {n}x{n}, got {self.data.shape}")
        self.back: Optional[np.ndarray] = None
        self.generation = 0

    @classmethod
    def random(cls, spec: FractalSpec, r: int, seed: int, high: int = 2) -> "Grid":
        """Member cells drawn uniformly from ``[0, high)``; others empty."""
        grid = cls(spec, r)
        rng = np.random.default_rng(seed)
        values = rng.integers(0, high, size=grid.data.shape, dtype=np.int64)
        grid.data[grid.mask] = values[grid.mask]
        return grid

    @cached_property
    def mask(self) -> np.ndarray:
        return dense_mask_cached(self.spec, self.r)

    def copy(self) -> "Grid":
        out = Grid(self.spec, self.r, self.data.copy(), self.empty)
        out.generation = self.generation
        return out

    def swap(self):
        self.data, self.back = self.back, self.data
        self.generation += 1

    def compact(self) -> np.ndarray:
        return compact_store(self.spec, BlockGeometry.build(self.spec, side(self.spec, self.r)), self.data)


class NonMemberWrite(RuntimeError):
    def __init__(self, cell):
        super().__init__(f"write to non-member cell {cell}")
        self.cell = cell


class SingleWrite:
    """Write a constant into every cell the launch reaches."""

    def __init__(self, grid: Grid, value: int = 1):
        self.grid = grid
        self.value = value

    def __call__(self, batch: ThreadBatch):
        bad = ~self.grid.mask[batch.y, batch.x]
        if bad.any():
            i = np.flatnonzero(bad)[0]
            raise NonMemberWrite((int(batch.x[i]), int(batch.y[i])))
        self.grid.data[batch.y, batch.x] = self.value


class Reduction:
    """Return each thread's cell value; the engine sums them per block."""

    def __init__(self, grid: Grid):
        self.grid = grid

    def __call__(self, batch: ThreadBatch):
        return self.grid.data[batch.y, batch.x]


_MOORE = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)]


class CAStep:
    """One life-like update read from ``grid.data`` and written to ``grid.back``.

    Neighbours are the Moore cells that are fractal members; cells outside
    the embedding count as dead.  Call :meth:`Grid.swap` after the launch.
    """

    def __init__(self, grid: Grid, rule: LifeRule = CONWAY):
        self.grid = grid
        self.rule = rule
        if grid.back is None:
            grid.back = np.full_like(grid.data, grid.empty)
        self._padded = np.pad(np.where(grid.mask, grid.data, 0), 1)
        self._birth = np.array(sorted(rule.birth), dtype=np.int64)
        self._survive = np.array(sorted(rule.survive), dtype=np.int64)

    def __call__(self, batch: ThreadBatch):
        x, y = batch.x + 1, batch.y + 1
        count = np.zeros(x.size, dtype=np.int64)
        for dx, dy in _MOORE:
            count += self._padded[y + dy, x + dx]
        alive = self._padded[y, x] != 0
        nxt = np.where(alive, np.isin(count, self._survive), np.isin(count, self._birth))
        self.grid.back[batch.y, batch.x] = nxt.astype(np.int64)


def run_single_write(config: DispatchConfig, grid: Optional[Grid] = None, value: int = 1, workers: int = 1):
    grid = grid if grid is not None else Grid(config.spec, config.r)
    report = launch(config, SingleWrite(grid, value), workers=workers)
    return grid, report


def run_reduction(config: DispatchConfig, grid: Grid, workers: int = 1):
    report = launch(config, Reduction(grid), workers=workers)
    return report.value, report


def run_ca(config: DispatchConfig, grid: Grid, steps: int, rule: LifeRule = CONWAY, workers: int = 1):
    """Advance ``grid`` in place by ``steps`` generations; returns the per-step reports."""
    reports = []
    for _ in range(steps):
        reports.append(launch(config, CAStep(grid, rule), workers=workers))
        grid.swap()
    return reports


# -- sequential oracles ------------------------------------------------------

def reduction_oracle(grid: Grid) -> int:
    total = 0
    for v in grid.data[grid.mask].tolist():
        total += v
    return total


def ca_oracle_step(state: np.ndarray, mask: np.ndarray, rule: LifeRule = CONWAY) -> np.ndarray:
    """Dense masked life step: neighbours counted by shifting the whole grid."""
    live = (state != 0) & mask
    n = state.shape[0]
    count = np.zeros((n, n), dtype=np.int64)
    for dx, dy in _MOORE:
        shifted = np.zeros((n, n), dtype=bool)
        dst_y = slice(max(0, -dy), n - max(0, dy))
        dst_x = slice(max(0, -dx), n - max(0, dx))
        src_y = slice(max(0, dy), n - max(0, -dy))
        src_x = slice(max(0, dx), n - max(0, -dx))
        shifted[dst_y, dst_x] = live[src_y, src_x]
        count += shifted
    born = np.isin(count, list(rule.birth)) & ~live
    stay = np.isin(count, list(rule.survive)) & live
    return ((born | stay) & mask).astype(np.int64)


def expected_threads(config: DispatchConfig) -> int:
    """Closed-form thread count of a launch (used to cross-check counters)."""
    if config.mode is Mode.BOUNDING_BOX:
        return config.n**2
    r_b = config.geometry.r_b
    if config.backend is Backend.MMA_V2:
        gw, gh = mma.variant2_launch_dims(config.spec, r_b)
        return gw * gh * 4 * config.rho**2
    return volume(config.spec, r_b) * config.rho**2


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    lx = np.log(np.asarray(ns, dtype=np.float64))
    ly = np.log(np.asarray(values, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])
