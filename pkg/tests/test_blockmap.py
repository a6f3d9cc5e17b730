import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbbmap.blockmap import (
    BlockGeometry,
    IntraBlockStrategy,
    beta,
    lambda_array,
    lambda_inverse,
    lambda_inverse_array,
    lambda_map,
    level_offsets,
    local_pattern,
    map_thread,
    shared_lookup_table,
    sierpinski_arith_hash,
)
from nbbmap.errors import ConfigError, DomainError, RangeError
from nbbmap.fractal import BUILTIN_SPECS, CARPET, SIERPINSKI, VICSEK, enumerate_cells, orthotope_dims

SPECS = list(BUILTIN_SPECS.values())
STRATEGIES = list(IntraBlockStrategy)


def orthotope(spec, r_b):
    w, h = orthotope_dims(spec, r_b)
    return [(wx, wy) for wy in range(h) for wx in range(w)]


class TestGeometry:
    def test_build(self):
        g = BlockGeometry.build(SIERPINSKI, 256, 8)
        assert (g.n_b, g.r_b, g.threads_per_block) == (32, 5, 64)
        assert BlockGeometry.from_level(CARPET, 2, 3) == BlockGeometry(3, 27, 9, 2)

    @pytest.mark.parametrize("n, rho", [(12, 1), (16, 3), (16, 32)])
    def test_invalid(self, n, rho):
        with pytest.raises(ConfigError):
            BlockGeometry.build(SIERPINSKI, n, rho)

    def test_rho_one_carpet(self):
        g = BlockGeometry.build(CARPET, 27, 1)
        assert (g.n_b, g.r_b) == (27, 3)
        with pytest.raises(ConfigError):
            BlockGeometry.build(CARPET, 27, 2)


class TestBeta:
    def test_examples(self):
        assert beta(SIERPINSKI, (2, 0), 1) == 2
        assert beta(SIERPINSKI, (0, 2), 2) == 2
        for mu in range(1, 10):
            assert beta(SIERPINSKI, (0, 0), mu) == 0

    @given(st.sampled_from(SPECS), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(1, 20))
    def test_range_and_digits(self, spec, wx, wy, mu):
        b = beta(spec, (wx, wy), mu)
        assert 0 <= b < spec.k
        coord = wx if mu % 2 else wy
        digits = np.base_repr(coord, spec.k)[::-1]
        pos = (mu + 1) // 2 - 1
        assert b == (int(digits[pos], spec.k) if pos < len(digits) else 0)

    def test_level_one_consumes_x(self):
        # the r=1 orthotope is 3x1, so level 1 must read omega_x
        w, h = orthotope_dims(SIERPINSKI, 1)
        assert (w, h) == (3, 1)
        assert [beta(SIERPINSKI, (wx, 0), 1) for wx in range(3)] == [0, 1, 2]


class TestLambda:
    def test_examples(self):
        g2 = BlockGeometry.from_level(SIERPINSKI, 2)
        assert lambda_map(SIERPINSKI, g2, (1, 1)) == (0, 3)
        assert lambda_map(SIERPINSKI, g2, (2, 2)) == (3, 3)
        for spec in SPECS:
            assert lambda_map(spec, BlockGeometry.from_level(spec, 0), (0, 0)) == (0, 0)

    def test_examples_are_members(self):
        for x, y in [(0, 3), (3, 3)]:
            assert (x & (3 - y)) == 0

    def test_level_offsets(self):
        los = level_offsets(SIERPINSKI, 2, (1, 1))
        assert [lo.beta for lo in los] == [1, 1]
        assert [lo.delta for lo in los] == [(0, 1), (0, 2)]

    def test_out_of_range(self):
        g = BlockGeometry.from_level(SIERPINSKI, 2)
        with pytest.raises(RangeError):
            lambda_map(SIERPINSKI, g, (3, 0))
        with pytest.raises(RangeError):
            lambda_map(SIERPINSKI, g, (0, -1))

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
    def test_bijective(self, spec):
        for r_b in range(7 if spec.k < 8 else 6):
            g = BlockGeometry.from_level(spec, r_b)
            omegas = orthotope(spec, r_b)
            if len(omegas) <= 2000:
                image = [lambda_map(spec, g, w) for w in omegas]
            else:
                xs, ys = lambda_array(spec, r_b, *np.array(omegas).T)
                image = list(zip(xs.tolist(), ys.tolist()))
            assert len(set(image)) == len(image) == spec.k**r_b
            assert set(image) == enumerate_cells(spec, r_b)

    @given(st.sampled_from(SPECS), st.integers(0, 12), st.data())
    def test_array_matches_scalar(self, spec, r_b, data):
        w, h = orthotope_dims(spec, r_b)
        wx = data.draw(st.integers(0, w - 1))
        wy = data.draw(st.integers(0, h - 1))
        xs, ys = lambda_array(spec, r_b, [wx], [wy])
        assert (int(xs[0]), int(ys[0])) == lambda_map(spec, BlockGeometry.from_level(spec, r_b), (wx, wy))

    @given(st.sampled_from(SPECS), st.integers(1, 12), st.data())
    def test_offsets_stay_inside(self, spec, r_b, data):
        w, h = orthotope_dims(spec, r_b)
        omega = (data.draw(st.integers(0, w - 1)), data.draw(st.integers(0, h - 1)))
        partial = np.zeros(2, dtype=np.int64)
        for lo in level_offsets(spec, r_b, omega):
            scale = spec.s ** (lo.mu - 1)
            assert lo.delta[0] % scale == 0 and lo.delta[1] % scale == 0
            assert max(lo.delta) < spec.s**lo.mu
            partial += lo.delta
            assert partial.max() <= spec.s**lo.mu - 1


class TestInverse:
    def test_examples(self):
        g2 = BlockGeometry.from_level(SIERPINSKI, 2)
        assert lambda_inverse(SIERPINSKI, g2, (0, 3)) == (1, 1)
        for r_b in range(6):
            assert lambda_inverse(SIERPINSKI, BlockGeometry.from_level(SIERPINSKI, r_b), (0, 0)) == (0, 0)

    def test_round_trip_r5(self):
        g = BlockGeometry.from_level(SIERPINSKI, 5)
        omegas = orthotope(SIERPINSKI, 5)
        assert len(omegas) == 243
        for w in omegas:
            assert lambda_inverse(SIERPINSKI, g, lambda_map(SIERPINSKI, g, w)) == w

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
    def test_round_trip_members(self, spec):
        for r_b in range(5):
            g = BlockGeometry.from_level(spec, r_b)
            for p in enumerate_cells(spec, r_b):
                assert lambda_map(spec, g, lambda_inverse(spec, g, p)) == p
            xs, ys = np.array(sorted(enumerate_cells(spec, r_b))).T
            wx, wy = lambda_inverse_array(spec, r_b, xs, ys)
            bx, by = lambda_array(spec, r_b, wx, wy)
            assert np.array_equal(bx, xs) and np.array_equal(by, ys)

    def test_non_member(self):
        g = BlockGeometry.from_level(SIERPINSKI, 2)
        with pytest.raises(DomainError):
            lambda_inverse(SIERPINSKI, g, (1, 0))
        with pytest.raises(DomainError):
            lambda_inverse_array(SIERPINSKI, 2, [0, 1], [0, 0])
        with pytest.raises(RangeError):
            lambda_inverse(SIERPINSKI, g, (4, 4))


class TestArithHash:
    def test_table(self):
        assert sierpinski_arith_hash(0) == (0, 0)
        assert sierpinski_arith_hash(1) == (0, 1)
        assert sierpinski_arith_hash(2) == (1, 1)
        assert [sierpinski_arith_hash(b) for b in range(3)] == list(SIERPINSKI.offsets)

    @pytest.mark.parametrize("b", [-1, 3, 7])
    def test_domain(self, b):
        with pytest.raises(DomainError):
            sierpinski_arith_hash(b)


class TestMapThread:
    def test_examples(self):
        g = BlockGeometry.from_level(SIERPINSKI, 0, 4)
        assert map_thread(SIERPINSKI, g, (0, 0), (0, 3)) == (0, 3)
        assert map_thread(SIERPINSKI, g, (0, 0), (1, 0)) is None

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_rho_one(self, strategy):
        for spec in SPECS:
            g = BlockGeometry.from_level(spec, 3, 1)
            for w in orthotope(spec, 3)[:20]:
                assert map_thread(spec, g, w, (0, 0), strategy) == lambda_map(spec, g, w)

    def test_thread_range(self):
        g = BlockGeometry.from_level(SIERPINSKI, 1, 2)
        with pytest.raises(RangeError):
            map_thread(SIERPINSKI, g, (0, 0), (2, 0))

    def test_lookup_table_shape(self):
        table = shared_lookup_table(SIERPINSKI, 8)
        assert table.shape == (64, 2)
        assert (table[:, 0] >= 0).sum() == 27
        assert not table.flags.writeable

    def test_unroll_needs_power_of_s(self):
        with pytest.raises(ConfigError):
            local_pattern(CARPET, 2, IntraBlockStrategy.FURTHER_UNROLLING)

    @pytest.mark.parametrize("rho", [2, 4, 8])
    def test_strategy_agreement(self, rho):
        for r_b in range(5):
            g = BlockGeometry.from_level(SIERPINSKI, r_b, rho)
            for w in orthotope(SIERPINSKI, r_b):
                per = {st: [map_thread(SIERPINSKI, g, w, (tx, ty), st)
                            for ty in range(rho) for tx in range(rho)] for st in STRATEGIES}
                assert per[IntraBlockStrategy.FURTHER_UNROLLING] == per[IntraBlockStrategy.SHARED_LOOKUP_TABLE]
                cells = {st: sorted(c for c in v if c is not None) for st, v in per.items()}
                ref = cells[IntraBlockStrategy.BOUNDING_SUB_BOXES]
                assert len(ref) == 3 ** g.local_level(SIERPINSKI) and len(set(ref)) == len(ref)
                assert all(v == ref for v in cells.values())

    @pytest.mark.parametrize("spec", [VICSEK, CARPET], ids=lambda s: s.name)
    def test_strategy_agreement_base3(self, spec):
        rho = 3
        g = BlockGeometry.from_level(spec, 2, rho)
        for w in orthotope(spec, 2):
            cells = {st: sorted(c for ty in range(rho) for tx in range(rho)
                                if (c := map_thread(spec, g, w, (tx, ty), st)) is not None) for st in STRATEGIES}
            assert len({tuple(v) for v in cells.values()}) == 1
            assert len(cells[IntraBlockStrategy.BOUNDING_SUB_BOXES]) == spec.k

    def test_parse(self):
        assert IntraBlockStrategy.parse("LUT") is IntraBlockStrategy.SHARED_LOOKUP_TABLE
        with pytest.raises(ConfigError):
            IntraBlockStrategy.parse("warp")
