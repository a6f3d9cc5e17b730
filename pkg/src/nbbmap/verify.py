"""Oracle suite behind ``nbbmap verify``.

Every check compares a fast path against an independent brute-force
oracle and records which public operations it exercised, so the test suite
can assert that the suite as a whole touches the entire public API.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import blockmap as bm
from . import mma
from . import sim
from .codec import compact_load, compact_store
from .errors import ResourceError
from .fractal import (
    FractalSpec,
    cells_to_mask,
    enumerate_cells,
    hausdorff,
    is_member,
    member_mask,
    orthotope_dims,
    side,
    volume,
)

MAX_BLOCK_LEVEL = 12
MAX_EMBED_LEVEL = 8
VOLUME_BUDGET = 1 << 22
EMBED_BUDGET = 1 << 18  # cells of an embedding swept exhaustively
MODE_BUDGET = 1 << 16

PUBLIC_OPS = frozenset({
    "volume", "hausdorff", "orthotope_dims", "is_member", "enumerate",
    "beta", "lambda", "lambda_inverse", "sierpinski_arith_hash", "map_thread",
    "compact_store", "compact_load",
    "encode_variant1", "encode_variant2", "encode_variant3", "mma_eval",
    "launch", "workload_single_write", "workload_reduction", "workload_ca_step",
    "work_quotient",
})


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    covers: frozenset = field(default_factory=frozenset)


def _levels(spec: FractalSpec, rmax: int, cap: int, budget: int, cells) -> range:
    top = 0
    for r in range(min(rmax, cap) + 1):
        if cells(spec, r) > budget:
            break
        top = r
    return range(top + 1)


def _embed_cells(spec, r):
    return side(spec, r) ** 2


def _block_cells(spec, r):
    return volume(spec, r)


def check_fractal_oracles(spec: FractalSpec, rmax: int) -> CheckResult:
    levels = _levels(spec, rmax, MAX_EMBED_LEVEL, EMBED_BUDGET, _embed_cells)
    for r in levels:
        cells = enumerate_cells(spec, r)
        w, h = orthotope_dims(spec, r)
        if not (len(cells) == volume(spec, r) == spec.k**r == w * h):
            return CheckResult("fractal oracles", False, f"volume mismatch at r={r}")
        if round(side(spec, r) ** hausdorff(spec)) != volume(spec, r):
            return CheckResult("fractal oracles", False, f"n**H != k**r at r={r}")
        n = side(spec, r)
        for x, y in itertools.product(range(n), repeat=2):
            member = is_member(spec, x, y, r)
            if member != ((x, y) in cells):
                return CheckResult("fractal oracles", False, f"is_member disagrees at ({x},{y}), r={r}")
            if bm.is_sierpinski(spec) and member != ((x & (n - 1 - y)) == 0):
                return CheckResult("fractal oracles", False, f"bit test disagrees at ({x},{y}), r={r}")
    return CheckResult("fractal oracles", True, f"r<={levels[-1]}",
                       frozenset({"volume", "hausdorff", "orthotope_dims", "is_member", "enumerate"}))


def check_bijectivity(spec: FractalSpec, rmax: int) -> CheckResult:
    levels = _levels(spec, rmax, MAX_BLOCK_LEVEL, VOLUME_BUDGET, _block_cells)
    for r_b in levels:
        geom = bm.BlockGeometry.from_level(spec, r_b)
        w, h = orthotope_dims(spec, r_b)
        if volume(spec, r_b) <= 4096:
            image = [bm.lambda_map(spec, geom, (wx, wy)) for wy in range(h) for wx in range(w)]
            for wx, wy in [(0, 0), (w - 1, h - 1), (w // 2, h // 2)]:
                digits = [bm.beta(spec, (wx, wy), mu) for mu in range(1, r_b + 1)]
                if any(not 0 <= d < spec.k for d in digits):
                    return CheckResult("bijectivity", False, f"beta out of range at r_b={r_b}")
        else:
            wy, wx = np.mgrid[0:h, 0:w]
            xs, ys = bm.lambda_array(spec, r_b, wx.ravel(), wy.ravel())
            image = list(zip(xs.tolist(), ys.tolist()))
        if len(set(image)) != len(image):
            return CheckResult("bijectivity", False, f"collision at r_b={r_b}")
        if volume(spec, r_b) <= 1 << 18:
            if set(image) != enumerate_cells(spec, r_b):
                return CheckResult("bijectivity", False, f"image != enumeration at r_b={r_b}")
        else:
            xs, ys = np.array(image).T
            if not member_mask(spec, xs, ys, r_b).all():
                return CheckResult("bijectivity", False, f"non-member in image at r_b={r_b}")
    return CheckResult("bijectivity", True, f"r_b<={levels[-1]}", frozenset({"lambda", "beta", "enumerate"}))


def check_inverse(spec: FractalSpec, rmax: int) -> CheckResult:
    levels = _levels(spec, rmax, MAX_BLOCK_LEVEL, VOLUME_BUDGET, _block_cells)
    for r_b in levels:
        geom = bm.BlockGeometry.from_level(spec, r_b)
        w, h = orthotope_dims(spec, r_b)
        if volume(spec, r_b) <= 4096:
            for wy in range(h):
                for wx in range(w):
                    p = bm.lambda_map(spec, geom, (wx, wy))
                    if bm.lambda_inverse(spec, geom, p) != (wx, wy):
                        return CheckResult("inverse round-trip", False, f"omega=({wx},{wy}) r_b={r_b}")
        else:
            wy, wx = np.mgrid[0:h, 0:w]
            xs, ys = bm.lambda_array(spec, r_b, wx.ravel(), wy.ravel())
            bx, by = bm.lambda_inverse_array(spec, r_b, xs, ys)
            if not ((bx == wx.ravel()).all() and (by == wy.ravel()).all()):
                return CheckResult("inverse round-trip", False, f"r_b={r_b}")
    return CheckResult("inverse round-trip", True, f"r_b<={levels[-1]}", frozenset({"lambda_inverse"}))


def check_arith_hash(spec: FractalSpec, rmax: int) -> CheckResult:
    if not bm.is_sierpinski(spec):
        return CheckResult("arithmetic hash", True, "n/a (not the gasket)")
    bad = [b for b in range(3) if bm.sierpinski_arith_hash(b) != spec.offsets[b]]
    return CheckResult("arithmetic hash", not bad, f"mismatch at {bad}" if bad else "H[0..2]",
                       frozenset({"sierpinski_arith_hash"}))


def _block_edges(spec: FractalSpec, cap: int = 8):
    rho, out = 1, []
    while rho <= cap:
        out.append(rho)
        rho *= spec.s
    return out


def check_strategies(spec: FractalSpec, rmax: int) -> CheckResult:
    strategies = list(bm.IntraBlockStrategy)
    top = min(rmax, 4)
    for rho in _block_edges(spec):
        for r_b in range(top + 1):
            geom = bm.BlockGeometry.from_level(spec, r_b, rho)
            if volume(spec, r_b) * rho * rho > 1 << 16:
                break
            w, h = orthotope_dims(spec, r_b)
            for wx, wy in itertools.product(range(w), range(h)):
                per = {}
                for st in strategies:
                    per[st] = [bm.map_thread(spec, geom, (wx, wy), (tx, ty), st)
                               for ty in range(rho) for tx in range(rho)]
                unroll = per[bm.IntraBlockStrategy.FURTHER_UNROLLING]
                if unroll != per[bm.IntraBlockStrategy.SHARED_LOOKUP_TABLE]:
                    return CheckResult("strategy agreement", False, f"unroll/lut differ rho={rho} omega=({wx},{wy})")
                sets = {st: [c for c in cells if c is not None] for st, cells in per.items()}
                ref = sorted(sets[bm.IntraBlockStrategy.BOUNDING_SUB_BOXES])
                for st, cells in sets.items():
                    if sorted(cells) != ref or len(set(cells)) != len(cells):
                        return CheckResult("strategy agreement", False, f"{st.value} differs rho={rho} omega=({wx},{wy})")
    return CheckResult("strategy agreement", True, f"rho in {_block_edges(spec)}, r_b<={top}", frozenset({"map_thread"}))


def check_mma(spec: FractalSpec, rmax: int) -> CheckResult:
    name = "MMA equivalence"
    top = min(rmax, 10)
    while top > 0 and volume(spec, top) > 1 << 16:
        top -= 1
    for r_b in range(top + 1):
        geom = bm.BlockGeometry.from_level(spec, r_b)
        w, h = orthotope_dims(spec, r_b)
        wy, wx = np.mgrid[0:h, 0:w]
        ref_x, ref_y = bm.lambda_array(spec, r_b, wx.ravel(), wy.ravel())
        vx, vy = mma.variant1_batch(spec, r_b, wx.ravel(), wy.ravel())
        if not ((vx == ref_x).all() and (vy == ref_y).all()):
            return CheckResult(name, False, f"variant 1 batch r_b={r_b}")
        omega = (w - 1, h - 1)
        A, B = mma.encode_variant1(spec, geom, omega)
        if mma.decode_variant1(mma.mma_eval(A, B)) != bm.lambda_map(spec, geom, omega):
            return CheckResult(name, False, f"variant 1 r_b={r_b}")
        # variant 2: groups of 2x2 sub-blocks over the rounded-up orthotope
        gw, gh = mma.variant2_launch_dims(spec, r_b)
        gy, gx = np.mgrid[0:gh, 0:gw]
        sx, sy, act, px, py = mma.variant2_batch(spec, r_b, gx.ravel(), gy.ravel())
        rx, ry = bm.lambda_array(spec, r_b, sx[act], sy[act])
        if not ((px[act] == rx).all() and (py[act] == ry).all()):
            return CheckResult(name, False, f"variant 2 batch r_b={r_b}")
        idle = sum(1 for a in range(2 * gw) for b in range(2 * gh) if a >= w or b >= h)
        if not idle == int((~act).sum()) == mma.variant2_inactive_count(spec, r_b):
            return CheckResult(name, False, f"variant 2 idle count r_b={r_b}")
        for gxy in {(0, 0), (gw - 1, gh - 1)}:
            subs = [(2 * gxy[0] + i % 2, 2 * gxy[1] + i // 2) for i in range(4)]
            A, B = mma.encode_variant2(spec, geom, subs)
            pairs = mma.decode_variant2(mma.mma_eval(A, B), 4)
            for (a, b), pair, ok in zip(subs, pairs, mma.subblock_active(spec, geom, subs)):
                if ok and pair != bm.lambda_map(spec, geom, (a, b)):
                    return CheckResult(name, False, f"variant 2 sub-block ({a},{b}) r_b={r_b}")
    # variant 3 against map_thread, exhaustive per block
    rho = _block_edges(spec, mma.FRAGMENT)[-1]
    for r_b in range(min(rmax, 3) + 1):
        geom = bm.BlockGeometry.from_level(spec, r_b, rho)
        pat = bm.subbox_pattern(spec, rho)
        w, h = orthotope_dims(spec, r_b)
        for omega in itertools.product(range(w), range(h)):
            A, Bx, Cx, By, Cy = mma.encode_variant3(spec, geom, omega, rho=rho)
            Dx, Dy = mma.mma_eval(A, Bx, Cx), mma.mma_eval(A, By, Cy)
            for tx, ty, act in zip(pat.tx, pat.ty, pat.active):
                want = bm.map_thread(spec, geom, omega, (tx, ty))
                if act and want != (int(Dx[tx, ty]), int(Dy[tx, ty])):
                    return CheckResult(name, False, f"variant 3 omega={omega} thread=({tx},{ty})")
                if not act and want is not None:
                    return CheckResult(name, False, f"variant 3 activity omega={omega}")
    # linearity of the accumulate
    rng = np.random.default_rng(0)
    A, B, C1, C2 = (rng.integers(-8, 8, size=(16, 16)).astype(float) for _ in range(4))
    lhs = mma.mma_eval(A, B, C1 + C2) - mma.mma_eval(A, B, C2)
    rhs = mma.mma_eval(A, B, C1) - mma.mma_eval(A, B, mma.zero_fragment())
    if not np.array_equal(lhs, rhs):
        return CheckResult(name, False, "mma_eval is not linear in C")
    return CheckResult(name, True, f"v1/v2 r_b<={top}, v3 rho={rho}",
                       frozenset({"encode_variant1", "encode_variant2", "encode_variant3", "mma_eval"}))


def check_codec(spec: FractalSpec, rmax: int) -> CheckResult:
    levels = _levels(spec, rmax, MAX_EMBED_LEVEL, EMBED_BUDGET * 4, _embed_cells)
    rng = np.random.default_rng(1)
    for r_b in levels:
        geom = bm.BlockGeometry.from_level(spec, r_b)
        n = side(spec, r_b)
        grid = rng.integers(-(2**40), 2**40, size=(n, n), dtype=np.int64)
        compact = compact_store(spec, geom, grid)
        if compact.size != volume(spec, r_b):
            return CheckResult("compact codec", False, f"size {compact.size} at r_b={r_b}")
        back = compact_load(spec, geom, compact)
        mask = cells_to_mask(enumerate_cells(spec, r_b), n)
        if not np.array_equal(back[mask], grid[mask]) or back[~mask].any():
            return CheckResult("compact codec", False, f"round-trip r_b={r_b}")
    return CheckResult("compact codec", True, f"r_b<={levels[-1]}", frozenset({"compact_store", "compact_load"}))


def mode_configs(spec: FractalSpec, r: int):
    """All lambda-mode configurations valid at level ``r`` with rho <= 8."""
    for rho in _block_edges(spec):
        if rho not in sim.ALLOWED_RHO or side(spec, r) % rho:
            continue
        for st in bm.IntraBlockStrategy:
            for backend in sim.Backend:
                yield sim.DispatchConfig(spec, r, rho, sim.Mode.LAMBDA, st, backend)


def check_modes(spec: FractalSpec, rmax: int, seed: int = 7, ca_steps: int = 2) -> CheckResult:
    name = "mode equivalence"
    levels = _levels(spec, rmax, MAX_EMBED_LEVEL, MODE_BUDGET, _embed_cells)
    for r in levels:
        bb = sim.DispatchConfig(spec, r, 1, sim.Mode.BOUNDING_BOX)
        ref_sw, bb_report = sim.run_single_write(bb)
        field = sim.Grid.random(spec, r, seed, high=1000)
        ref_rd, _ = sim.run_reduction(bb, field)
        life = sim.Grid.random(spec, r, seed + 1)
        ref_ca = life.copy()
        sim.run_ca(bb, ref_ca, ca_steps)
        for config in mode_configs(spec, r):
            grid, report = sim.run_single_write(config)
            if not np.array_equal(grid.data, ref_sw.data):
                return CheckResult(name, False, f"SW differs: {config.label()}")
            if report.active != volume(spec, r) or report.threads != sim.expected_threads(config):
                return CheckResult(name, False, f"counters off: {config.label()}")
            if sim.run_reduction(config, field)[0] != ref_rd:
                return CheckResult(name, False, f"RD differs: {config.label()}")
            state = life.copy()
            sim.run_ca(config, state, ca_steps)
            if not np.array_equal(state.data, ref_ca.data):
                return CheckResult(name, False, f"CA differs: {config.label()}")
        lam = sim.launch(sim.DispatchConfig(spec, r, 1, sim.Mode.LAMBDA))
        expected = side(spec, r) ** 2 / volume(spec, r)
        if sim.work_quotient(bb_report, lam) != expected:
            return CheckResult(name, False, f"work quotient at r={r}")
    return CheckResult(name, True, f"SW/RD/CA r<={levels[-1]}",
                       frozenset({"launch", "workload_single_write", "workload_reduction",
                                  "workload_ca_step", "work_quotient"}))


def check_ca_oracle(spec: FractalSpec, rmax: int, steps: int = 10, seed: int = 5) -> CheckResult:
    levels = _levels(spec, rmax, 5, MODE_BUDGET, _embed_cells)
    r = levels[-1]
    config = sim.DispatchConfig(spec, r, 1, sim.Mode.LAMBDA)
    grid = sim.Grid.random(spec, r, seed)
    mask = cells_to_mask(enumerate_cells(spec, r), side(spec, r))
    state = grid.data.copy()
    for step in range(steps):
        sim.run_ca(config, grid, 1)
        state = sim.ca_oracle_step(state, mask)
        if not np.array_equal(grid.data, state):
            return CheckResult("CA oracle", False, f"step {step + 1} differs at r={r}")
    return CheckResult("CA oracle", True, f"{steps} steps at r={r}", frozenset({"workload_ca_step"}))


CHECKS: list[Callable[[FractalSpec, int], CheckResult]] = [
    check_fractal_oracles,
    check_bijectivity,
    check_inverse,
    check_arith_hash,
    check_strategies,
    check_mma,
    check_codec,
    check_modes,
    check_ca_oracle,
]


def run_suite(spec: FractalSpec, rmax: int) -> list[CheckResult]:
    if rmax < 0:
        raise ValueError(f"rmax must be >= 0, got {rmax}")
    if rmax > MAX_BLOCK_LEVEL:
        raise ResourceError(f"r={rmax} exceeds the desk-scale cap of {MAX_BLOCK_LEVEL}")
    if volume(spec, rmax) > VOLUME_BUDGET:
        raise ResourceError(f"r={rmax}: {spec.name} has {volume(spec, rmax)} cells, budget is {VOLUME_BUDGET}")
    return [check(spec, rmax) for check in CHECKS]
