import math

import numpy as np
import pytest

from odt2d.grid import (
    ComplexField,
    Grid2D,
    PhysicsParams,
    RefractiveMap,
    ScatteringPotential,
    contrast,
    potential_from_ri,
    ri_from_potential,
    snr_db,
)


class TestGrid2D:
    def test_pixel_and_coords(self):
        grid = Grid2D(4, 2.0)
        assert grid.pixel == 0.5
        expect = np.array([-0.75, -0.25, 0.25, 0.75])
        np.testing.assert_allclose(grid.axis_coords(), expect)
        x, y = grid.meshgrid()
        # row index moves the axial coordinate, column index the lateral one
        np.testing.assert_allclose(y[:, 0], expect)
        np.testing.assert_allclose(x[0, :], expect)

    def test_pixel_center_invariant(self):
        grid = Grid2D(7, 3.5)
        x, y = grid.meshgrid()
        for i in (0, 3, 6):
            for j in (0, 2, 5):
                assert y[i, j] == pytest.approx((i + 0.5) * grid.pixel - grid.side_len / 2)
                assert x[i, j] == pytest.approx((j + 0.5) * grid.pixel - grid.side_len / 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            Grid2D(1, 1.0)
        with pytest.raises(ValueError):
            Grid2D(8, -1.0)


class TestPhysicsParams:
    def test_k0(self):
        phys = PhysicsParams(wavelength=1.0, n_b=1.333)
        assert phys.k0 == pytest.approx(2 * math.pi)
        assert phys.k_bg == pytest.approx(2 * math.pi * 1.333)

    def test_validation(self):
        with pytest.raises(ValueError):
            PhysicsParams(wavelength=0.0)
        with pytest.raises(ValueError):
            PhysicsParams(n_b=0.9)


class TestValueObjects:
    def test_rejects_nonfinite(self):
        grid = Grid2D(2, 1.0)
        with pytest.raises(ValueError):
            ScatteringPotential(grid, [1.0, np.nan, 0.0, 0.0])
        with pytest.raises(ValueError):
            ComplexField(grid, [1.0, np.inf, 0.0, 0.0])

    def test_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            ScatteringPotential(Grid2D(2, 1.0), [1.0, 2.0])

    def test_immutable(self):
        f = ScatteringPotential(Grid2D(2, 1.0), [1.0, 2.0, 3.0, 4.0])
        with pytest.raises(ValueError):
            f.values[0] = 9.0

    def test_refractive_map_floor(self):
        with pytest.raises(ValueError):
            RefractiveMap(Grid2D(2, 1.0), [1.0, 1.0, 0.5, 1.0])


class TestPotential:
    def test_homogeneous_maps_to_zero(self):
        grid = Grid2D(4, 1.0)
        phys = PhysicsParams(n_b=1.333)
        n = RefractiveMap(grid, np.full(16, 1.333))
        f = potential_from_ri(n, phys)
        np.testing.assert_array_equal(f.values, np.zeros(16))

    def test_water_to_peak_index_value(self):
        # k0^2 (1.457^2 - 1.333^2) with unit wavelength: 39.478 * 0.34596
        phys = PhysicsParams(wavelength=1.0, n_b=1.333)
        n = RefractiveMap(Grid2D(2, 1.0), np.full(4, 1.457))
        f = potential_from_ri(n, phys)
        assert f.values[0] == pytest.approx((2 * math.pi) ** 2 * (1.457 ** 2 - 1.333 ** 2))
        assert f.values[0] == pytest.approx(13.658, abs=5e-3)

    def test_round_trip(self, rng):
        grid = Grid2D(8, 2.0)
        phys = PhysicsParams(n_b=1.333)
        n = RefractiveMap(grid, 1.333 + 0.2 * rng.random(64))
        back = ri_from_potential(potential_from_ri(n, phys), phys)
        np.testing.assert_allclose(back.values, n.values, rtol=1e-12)


class TestContrast:
    def test_zero(self):
        grid = Grid2D(2, 1.0)
        phys = PhysicsParams(n_b=1.333)
        assert contrast(ScatteringPotential(grid, np.zeros(4)), phys) == 0.0

    def test_shepp_logan_peak(self):
        phys = PhysicsParams(n_b=1.333)
        n = RefractiveMap(Grid2D(2, 1.0), np.full(4, 1.457))
        c = contrast(potential_from_ri(n, phys), phys)
        assert c == pytest.approx((1.457 ** 2 - 1.333 ** 2) / 1.333 ** 2)
        assert c == pytest.approx(0.1947, abs=1e-4)

    def test_high_contrast_bead(self):
        phys = PhysicsParams(n_b=1.333)
        n = RefractiveMap(Grid2D(2, 1.0), np.full(4, 1.88))
        c = contrast(potential_from_ri(n, phys), phys)
        assert c == pytest.approx((1.88 ** 2 - 1.333 ** 2) / 1.333 ** 2)
        assert c == pytest.approx(0.9893, abs=5e-4)

    def test_sign_flip_and_linearity(self, rng):
        grid = Grid2D(4, 1.0)
        phys = PhysicsParams(n_b=1.2)
        vals = rng.standard_normal(16)
        c1 = contrast(ScatteringPotential(grid, vals), phys)
        assert contrast(ScatteringPotential(grid, -vals), phys) == c1
        assert contrast(ScatteringPotential(grid, 3.0 * vals), phys) == pytest.approx(3 * c1)


class TestSnr:
    def test_perfect_match_sentinel(self):
        grid = Grid2D(2, 1.0)
        f = ScatteringPotential(grid, [1.0, 2.0, 3.0, 4.0])
        assert snr_db(f, f) == math.inf

    def test_zero_estimate_is_zero_db(self):
        grid = Grid2D(2, 1.0)
        truth = ScatteringPotential(grid, [1.0, 2.0, 3.0, 4.0])
        zero = ScatteringPotential(grid, np.zeros(4))
        assert snr_db(zero, truth) == pytest.approx(0.0)

    def test_hand_value(self):
        grid = Grid2D(2, 1.0)
        truth = ScatteringPotential(grid, [3.0, 4.0, 0.0, 0.0])
        est = ScatteringPotential(grid, [3.0, 4.5, 0.0, 0.0])
        assert snr_db(est, truth) == pytest.approx(20.0)

    def test_zero_truth_rejected(self):
        grid = Grid2D(2, 1.0)
        zero = ScatteringPotential(grid, np.zeros(4))
        with pytest.raises(ValueError):
            snr_db(zero, zero)

    def test_scale_invariance_and_shift_sensitivity(self, rng):
        grid = Grid2D(4, 1.0)
        a = ScatteringPotential(grid, rng.standard_normal(16))
        b = ScatteringPotential(grid, rng.standard_normal(16))
        base = snr_db(a, b)
        for alpha in (0.3, -2.0, 17.0):
            scaled = snr_db(ScatteringPotential(grid, alpha * a.values),
                            ScatteringPotential(grid, alpha * b.values))
            assert scaled == pytest.approx(base, rel=1e-12)
        shifted = snr_db(ScatteringPotential(grid, a.values + 1.0),
                         ScatteringPotential(grid, b.values + 1.0))
        assert shifted != pytest.approx(base, rel=1e-6)
