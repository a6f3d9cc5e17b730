import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nbbmap import mma
from nbbmap.blockmap import BlockGeometry, IntraBlockStrategy, lambda_array, lambda_map, map_thread
from nbbmap.errors import CapacityError, ConfigError, ShapeError
from nbbmap.fractal import BUILTIN_SPECS, SIERPINSKI, orthotope_dims

SPECS = list(BUILTIN_SPECS.values())


def _v1(spec, geom, omega):
    A, B = mma.encode_variant1(spec, geom, omega)
    return mma.decode_variant1(mma.mma_eval(A, B))


class TestVariant1:
    def test_examples(self):
        g = BlockGeometry.from_level(SIERPINSKI, 2)
        assert _v1(SIERPINSKI, g, (1, 1)) == (0, 3)
        assert _v1(SIERPINSKI, BlockGeometry.from_level(SIERPINSKI, 0), (0, 0)) == (0, 0)

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
    def test_exhaustive(self, spec):
        for r_b in range(6):
            g = BlockGeometry.from_level(spec, r_b)
            w, h = orthotope_dims(spec, r_b)
            wy, wx = np.mgrid[0:h, 0:w]
            bx, by = mma.variant1_batch(spec, r_b, wx.ravel(), wy.ravel())
            x, y = lambda_array(spec, r_b, wx.ravel(), wy.ravel())
            assert np.array_equal(bx, x) and np.array_equal(by, y)
            if r_b <= 3:
                for ox, oy in zip(wx.ravel()[:40], wy.ravel()[:40]):
                    assert _v1(spec, g, (ox, oy)) == lambda_map(spec, g, (ox, oy))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            mma.encode_variant1(SIERPINSKI, BlockGeometry.from_level(SIERPINSKI, 17), (0, 0))


class TestVariant2:
    def test_four_subblocks(self):
        g = BlockGeometry.from_level(SIERPINSKI, 4, 16)
        omegas = [(0, 0), (1, 0), (0, 1), (1, 1)]
        A, B = mma.encode_variant2(SIERPINSKI, g, omegas)
        got = mma.decode_variant2(mma.mma_eval(A, B), 4)
        assert got == [lambda_map(SIERPINSKI, g, w) for w in omegas]

    def test_single_subblock_is_variant1(self):
        g = BlockGeometry.from_level(SIERPINSKI, 5)
        for w in [(0, 0), (5, 2), (26, 8)]:
            A, B = mma.encode_variant2(SIERPINSKI, g, [w])
            assert mma.decode_variant2(mma.mma_eval(A, B), 1)[0] == _v1(SIERPINSKI, g, w)

    def test_inactive_columns_zero(self):
        g = BlockGeometry.from_level(SIERPINSKI, 1)
        A, B = mma.encode_variant2(SIERPINSKI, g, [(2, 0), (3, 0)])
        assert list(mma.subblock_active(SIERPINSKI, g, [(2, 0), (3, 0)])) == [True, False]
        assert not B[:, 2:4].any()

    def test_inactive_count_r6(self):
        w, h = orthotope_dims(SIERPINSKI, 6)
        gw, gh = mma.variant2_launch_dims(SIERPINSKI, 6)
        brute = sum(1 for gy in range(gh) for gx in range(gw) for i in range(4)
                    if not (2 * gx + i % 2 < w and 2 * gy + i // 2 < h))
        assert brute == mma.variant2_inactive_count(SIERPINSKI, 6) == 55

    def test_inactive_fraction_decreases(self):
        frac = [mma.variant2_inactive_count(SIERPINSKI, r) / (4 * np.prod(mma.variant2_launch_dims(SIERPINSKI, r)))
                for r in range(2, 9)]
        # odd widths leave a spare column; the share shrinks as the orthotope grows
        assert all(b <= a for a, b in zip(frac[::2], frac[2::2]))
        assert all(b <= a for a, b in zip(frac[1::2], frac[3::2]))

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
    def test_batch_matches_direct(self, spec):
        for r_b in range(6):
            gw, gh = mma.variant2_launch_dims(spec, r_b)
            gy, gx = np.mgrid[0:gh, 0:gw]
            wx, wy, active, x, y = mma.variant2_batch(spec, r_b, gx.ravel(), gy.ravel())
            ex, ey = lambda_array(spec, r_b, wx[active], wy[active])
            assert np.array_equal(x[active], ex) and np.array_equal(y[active], ey)
            assert (~active).sum() == mma.variant2_inactive_count(spec, r_b)

    @pytest.mark.parametrize("count", [0, 9])
    def test_capacity(self, count):
        g = BlockGeometry.from_level(SIERPINSKI, 2)
        with pytest.raises(CapacityError):
            mma.encode_variant2(SIERPINSKI, g, [(0, 0)] * count)


class TestVariant3:
    def _cells(self, spec, geom, omega, strategy=IntraBlockStrategy.BOUNDING_SUB_BOXES):
        A, Bx, Cx, By, Cy = mma.encode_variant3(spec, geom, omega, geom.rho, strategy)
        return mma.mma_eval(A, Bx, Cx), mma.mma_eval(A, By, Cy)

    def test_examples(self):
        g = BlockGeometry.from_level(SIERPINSKI, 0, 16)
        Dx, Dy = self._cells(SIERPINSKI, g, (0, 0))
        assert (Dx[0, 15], Dy[0, 15]) == (0, 15)
        assert map_thread(SIERPINSKI, g, (0, 0), (1, 0)) is None

    def test_exhaustive_rho16(self):
        for r_b in range(4):
            g = BlockGeometry.from_level(SIERPINSKI, r_b, 16)
            w, h = orthotope_dims(SIERPINSKI, r_b)
            for wy in range(h):
                for wx in range(w):
                    Dx, Dy = self._cells(SIERPINSKI, g, (wx, wy))
                    for ty in range(16):
                        for tx in range(16):
                            cell = map_thread(SIERPINSKI, g, (wx, wy), (tx, ty))
                            if cell is not None:
                                assert (int(Dx[tx, ty]), int(Dy[tx, ty])) == cell

    @pytest.mark.parametrize("rho", [1, 2, 4, 8, 16])
    @pytest.mark.parametrize("strategy", list(IntraBlockStrategy))
    def test_batch(self, rho, strategy):
        r_b = 3
        w, h = orthotope_dims(SIERPINSKI, r_b)
        wy, wx = np.mgrid[0:h, 0:w]
        X, Y = mma.variant3_batch(SIERPINSKI, r_b, rho, wx.ravel(), wy.ravel(), strategy)
        g = BlockGeometry.from_level(SIERPINSKI, r_b, rho)
        for b, (ox, oy) in enumerate(zip(wx.ravel(), wy.ravel())):
            for i in range(rho * rho):
                cell = map_thread(SIERPINSKI, g, (ox, oy), (i % rho, i // rho), strategy)
                if cell is not None:
                    assert (X[b, i], Y[b, i]) == cell

    def test_rho_mismatch(self):
        g = BlockGeometry.from_level(SIERPINSKI, 1, 8)
        with pytest.raises(ConfigError):
            mma.encode_variant3(SIERPINSKI, g, (0, 0), rho=16)
        with pytest.raises(ConfigError):
            mma.encode_variant3(SIERPINSKI, g, (5, 0), rho=8)


class TestEval:
    def test_identity(self):
        eye = np.eye(16)
        M = np.arange(256.0).reshape(16, 16)
        assert np.array_equal(mma.mma_eval(eye, M), M)
        assert np.array_equal(mma.mma_eval(M, eye, M), 2 * M)

    @settings(max_examples=30)
    @given(st.integers(-50, 50), st.integers(-50, 50), st.integers(0, 2**16))
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        A, B1, B2 = (rng.integers(-9, 9, (16, 16)).astype(float) for _ in range(3))
        lhs = mma.mma_eval(A, a * B1 + b * B2)
        assert np.array_equal(lhs, a * mma.mma_eval(A, B1) + b * mma.mma_eval(A, B2))

    def test_shape(self):
        with pytest.raises(ShapeError):
            mma.mma_eval(np.zeros((8, 8)), np.zeros((16, 16)))
