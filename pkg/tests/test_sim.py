
import numpy as np
import pytest

from nbbmap import sim
from nbbmap.blockmap import lambda_inverse
from nbbmap.errors import ConfigError, LaunchError
from nbbmap.fractal import BUILTIN_SPECS, CARPET, SIERPINSKI, VICSEK, hausdorff, volume

STRATEGIES = ("unroll", "lut", "subbox")
BACKENDS = ("direct", "mma1", "mma2", "mma3")


def cfg(r, rho=1, mode="lambda", strategy="subbox", backend="direct", spec=SIERPINSKI):
    return sim.DispatchConfig(spec, r, rho, mode, strategy, backend)


class TestLaunch:
    def test_counts(self):
        bb = sim.launch(cfg(4, mode="bb"))
        lam = sim.launch(cfg(4))
        assert (bb.threads, bb.active, bb.wasted) == (256, 81, 175)
        assert (lam.threads, lam.active, lam.wasted) == (81, 81, 0)
        assert lam.r_b == 4 and bb.strategy == "none"

    def test_rho_blocks(self):
        rep = sim.launch(cfg(6, rho=4))
        assert rep.blocks == 81 and rep.threads == 81 * 16 and rep.active == 729

    def test_map_ops(self):
        assert sim.launch(cfg(4, mode="bb")).map_ops == 256
        assert sim.launch(cfg(4)).map_ops == 81 * (3 * 4 + 1)
        assert sim.launch(cfg(4, rho=4, strategy="unroll")).map_ops == 9 * (3 * 2 + 3 * 2 * 9)

    @pytest.mark.parametrize("spec", list(BUILTIN_SPECS.values()), ids=lambda s: s.name)
    def test_invariants(self, spec):
        for r in range(4):
            for rho in (1, 2):
                if spec.s**r % rho:
                    continue
                for backend in BACKENDS:
                    c = cfg(r, rho, backend=backend, spec=spec)
                    rep = sim.launch(c)
                    assert rep.active == volume(spec, r)
                    assert rep.threads == sim.expected_threads(c) == rep.active + rep.wasted
                    if backend != "mma2":
                        assert rep.threads == rho**2 * spec.k ** c.geometry.r_b

    def test_subblocks_inactive(self):
        assert sim.launch(cfg(8, rho=4, backend="mma2")).subblocks_inactive == 55


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(r=3, rho=3), dict(r=2, rho=8), dict(r=-1), dict(r=2, mode="diag"),
        dict(r=2, backend="mma9"), dict(r=2, strategy="warp"),
        dict(r=3, rho=1, spec=CARPET, backend="direct") | {"rho": 2},
        dict(r=17, backend="mma1"), dict(r=6, rho=32, backend="mma3"),
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            cfg(**kwargs)

    def test_label(self):
        assert cfg(3, 2).label() == "sierpinski r=3 rho=2 lambda/subbox/direct"


class TestWorkloads:
    def test_single_write(self):
        grid, rep = sim.run_single_write(cfg(3))
        assert grid.data.sum() == 27 and np.array_equal(grid.data.astype(bool), grid.mask)

    def test_reduction(self):
        grid = sim.Grid.random(SIERPINSKI, 5, seed=1, high=100)
        value, rep = sim.run_reduction(cfg(5, 2), grid)
        assert value == sim.reduction_oracle(grid) == int(grid.data[grid.mask].sum())
        ones = sim.Grid(SIERPINSKI, 4, sim.dense_mask_cached(SIERPINSKI, 4).astype(int))
        assert sim.run_reduction(cfg(4), ones)[0] == 81

    def test_ca_blinker_dies_on_gasket_corner(self):
        grid = sim.Grid(SIERPINSKI, 2)
        grid.data[3, 0] = grid.data[3, 1] = 1
        sim.run_ca(cfg(2), grid, 1)
        assert grid.data.sum() == 0

    def test_ca_oracle_ten_steps(self):
        grid = sim.Grid.random(SIERPINSKI, 5, seed=11)
        state = grid.data.copy()
        for _ in range(10):
            sim.run_ca(cfg(5, 4, strategy="lut"), grid, 1)
            state = sim.ca_oracle_step(state, grid.mask)
            assert np.array_equal(grid.data, state)

    @pytest.mark.parametrize("spec", [VICSEK, CARPET], ids=lambda s: s.name)
    def test_modes_agree_other_specs(self, spec):
        base = sim.Grid.random(spec, 3, seed=2)
        outs = []
        for c in (cfg(3, mode="bb", spec=spec), cfg(3, spec=spec, strategy="unroll"), cfg(3, spec=spec, backend="mma3")):
            g = base.copy()
            sim.run_ca(c, g, 3)
            outs.append(g.data)
            outs.append(sim.run_reduction(c, base)[0])
        assert all(np.array_equal(outs[0], o) for o in outs[0::2])
        assert len(set(outs[1::2])) == 1

    def test_launch_error_location(self):
        target = (5, 7)

        def kernel(batch):
            hit = (batch.x == target[0]) & (batch.y == target[1])
            if hit.any():
                raise sim.NonMemberWrite(target)

        with pytest.raises(LaunchError) as info:
            sim.launch(cfg(3, 2), kernel)
        geom = cfg(3, 2).geometry
        assert info.value.block == lambda_inverse(SIERPINSKI, geom, (2, 3))
        assert info.value.thread == (1, 1)

    def test_single_write_never_hits_non_members(self):
        for mode in ("bb", "lambda"):
            grid, _ = sim.run_single_write(cfg(4, 2, mode=mode))
            assert not grid.data[~grid.mask].any()

    def test_determinism_across_workers(self, monkeypatch):
        monkeypatch.setattr(sim, "CHUNK_THREADS", 64)
        grid = sim.Grid.random(SIERPINSKI, 6, seed=4, high=1 << 40)
        a = sim.run_reduction(cfg(6, 2), grid, workers=1)
        b = sim.run_reduction(cfg(6, 2), grid, workers=8)
        assert a[0] == b[0]
        assert a[1].csv_row(timing=False) == b[1].csv_row(timing=False)


class TestQuotient:
    def _q(self, r, weighted=False):
        return sim.work_quotient(sim.launch(cfg(r, mode="bb")), sim.launch(cfg(r)), weighted)

    def test_examples(self):
        assert self._q(8) == 65536 / 6561
        assert abs(self._q(8) - 9.99) < 0.005
        assert self._q(0) == 1.0
        assert self._q(4, weighted=True) == 256 / (4 * 81)

    def test_monotone_and_slope(self):
        qs = [(4**r) / (3**r) for r in range(2, 13)]
        measured = [self._q(r) for r in range(2, 9)]
        assert measured == pytest.approx(qs[:7], rel=0, abs=0)
        assert all(b > a for a, b in zip(qs, qs[1:]))
        slope = sim.loglog_slope([2**r for r in range(2, 13)], qs)
        assert slope == pytest.approx(2 - hausdorff(SIERPINSKI), rel=0.01)

    def test_mismatch(self):
        with pytest.raises(ConfigError):
            sim.work_quotient(sim.launch(cfg(3, mode="bb")), sim.launch(cfg(4)))
        with pytest.raises(ConfigError):
            sim.work_quotient(sim.launch(cfg(3)), sim.launch(cfg(3)))


def test_tree_sum():
    assert sim.tree_sum([]) == 0
    assert sim.tree_sum(range(101)) == 5050
    big = [2**62, 2**62, -(2**62), -(2**62), 5]
    assert sim.tree_sum(big) == 5
