import numpy as np
import pytest

from odt2d.forward import SolverBudget, plane_wave
from odt2d.gradient import (
    IlluminationRecord,
    grad_D_subset,
    grad_Dp,
    jacobian_adjoint_apply,
    jacobian_apply,
    subset_schedule,
)
from odt2d.greens import DetectorGeometry, build_detector_operator, build_green_kernel
from odt2d.grid import ComplexField, Grid2D, PhysicsParams, ScatteringPotential

from oracles import dense_forward_solve

TIGHT = SolverBudget(max_iters=2000, rel_change_tol=1e-12)


@pytest.fixture
def water():
    return PhysicsParams(wavelength=1.0, n_b=1.333)


def random_potential(grid, phys, rng, contrast=0.3):
    vals = rng.random(grid.n_pixels)
    vals *= contrast * phys.k0 ** 2 * phys.n_b ** 2 / vals.max()
    return ScatteringPotential(grid, vals)


def converged_field(grid, phys, f, u_in):
    """Forward solution from the dense oracle (independent of CG)."""
    return ComplexField(grid, dense_forward_solve(grid, phys.k_bg, f.values, u_in.values))


def h_map(grid, phys, f_values, u_in_values):
    """h(f) = diag(f) u(f) via the dense oracle."""
    u = dense_forward_solve(grid, phys.k_bg, f_values, u_in_values)
    return f_values * u


class TestJacobianApply:
    def test_zero_potential_reduces_to_diagonal(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f0 = ScatteringPotential(grid, np.zeros(64))
        u_in = plane_wave(grid, water, 0.0, 0.5)
        v = rng.standard_normal(64)
        out = jacobian_apply(kern, f0, u_in, v, TIGHT)
        np.testing.assert_allclose(out.values, u_in.values * v, atol=1e-13)

    def test_zero_direction(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f = random_potential(grid, water, rng)
        u_p = converged_field(grid, water, f, plane_wave(grid, water, 0.0, 0.5))
        out = jacobian_apply(kern, f, u_p, np.zeros(64), TIGHT)
        np.testing.assert_array_equal(out.values, np.zeros(64, complex))

    def test_directional_finite_difference(self, water, rng):
        grid = Grid2D(16, 2.0)
        kern = build_green_kernel(grid, water)
        f = random_potential(grid, water, rng)
        u_in = plane_wave(grid, water, 0.0, 1.0)
        u_p = converged_field(grid, water, f, u_in)
        v = rng.standard_normal(256)
        jv = jacobian_apply(kern, f, u_p, v, TIGHT).values
        eps = 1e-6
        fd = (h_map(grid, water, f.values + eps * v, u_in.values)
              - h_map(grid, water, f.values, u_in.values)) / eps
        assert np.linalg.norm(fd - jv) / np.linalg.norm(jv) < 1e-4


class TestJacobianAdjoint:
    def test_zero_potential(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f0 = ScatteringPotential(grid, np.zeros(64))
        u_in = plane_wave(grid, water, 0.0, 0.5)
        w = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        out = jacobian_adjoint_apply(kern, f0, u_in, w, TIGHT)
        np.testing.assert_allclose(out, np.conj(u_in.values) * w, atol=1e-13)

    def test_adjoint_dot_product(self, water, rng):
        grid = Grid2D(16, 2.0)
        kern = build_green_kernel(grid, water)
        f = random_potential(grid, water, rng)
        u_p = converged_field(grid, water, f, plane_wave(grid, water, 0.0, 1.0))
        v = rng.standard_normal(256)
        w = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        jv = jacobian_apply(kern, f, u_p, v, TIGHT).values
        jhw = jacobian_adjoint_apply(kern, f, u_p, w, TIGHT)
        lhs = np.vdot(w, jv)
        rhs = np.vdot(jhw, v.astype(complex))
        assert abs(lhs - rhs) / abs(lhs) < 1e-8

    def test_matches_dense_assembled_jacobian(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f = random_potential(grid, water, rng)
        u_p = converged_field(grid, water, f, plane_wave(grid, water, 0.0, 0.5))
        n = grid.n_pixels
        dense_j = np.empty((n, n), dtype=np.complex128)
        for col in range(n):
            e = np.zeros(n)
            e[col] = 1.0
            dense_j[:, col] = jacobian_apply(kern, f, u_p, e, TIGHT).values
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        jhw = jacobian_adjoint_apply(kern, f, u_p, w, TIGHT)
        ref = dense_j.conj().T @ w
        assert np.linalg.norm(jhw - ref) / np.linalg.norm(ref) < 1e-6


def make_fixture(water, rng, grid, n_det=10, contrast=0.3, angle=0.0):
    """Potential, detector, and an illumination with data generated from
    the dense oracle at the same potential (zero-residual setup)."""
    f = random_potential(grid, water, rng, contrast)
    xs = np.linspace(-grid.side_len / 3, grid.side_len / 3, n_det)
    pos = np.stack([xs, np.full(n_det, grid.side_len)], axis=1)
    det = build_detector_operator(DetectorGeometry(pos, grid), water)
    u_in = plane_wave(grid, water, angle, grid.side_len / 2)
    u_true = dense_forward_solve(grid, water.k_bg, f.values, u_in.values)
    y_sc = det.apply(f.values * u_true)
    uin_gamma = np.zeros(n_det, complex)  # scattered-field records only
    illum = IlluminationRecord(u_in=u_in, u_in_on_gamma=uin_gamma,
                               y_sc=y_sc, angle=angle)
    return f, det, illum


class TestGradDp:
    def test_zero_residual_at_truth(self, water, rng):
        grid = Grid2D(16, 2.0)
        kern = build_green_kernel(grid, water)
        f, det, illum = make_fixture(water, rng, grid)
        grad, fid = grad_Dp(kern, det, f, illum, TIGHT, TIGHT)
        y_norm2 = float(np.vdot(illum.y_sc, illum.y_sc).real)
        assert fid <= 1e-8 * y_norm2
        assert np.linalg.norm(grad) <= 1e-4 * y_norm2

    def test_matches_central_differences(self, water, rng):
        grid = Grid2D(16, 2.0)
        kern = build_green_kernel(grid, water)
        f, det, illum = make_fixture(water, rng, grid)
        # move away from the the zero-residual point
        f = ScatteringPotential(grid, f.values * 0.8)
        grad, _ = grad_Dp(kern, det, f, illum, TIGHT, TIGHT)

        def d_p(f_values):
            u = dense_forward_solve(grid, water.k_bg, f_values, illum.u_in.values)
            r = det.apply(f_values * u) - illum.y_sc
            return 0.5 * float(np.vdot(r, r).real)

        eps = 1e-5
        for pixel in rng.choice(grid.n_pixels, size=5, replace=False):
            e = np.zeros(grid.n_pixels)
            e[pixel] = 1.0
            fd = (d_p(f.values + eps * e) - d_p(f.values - eps * e)) / (2 * eps)
            assert fd == pytest.approx(grad[pixel], rel=1e-4)

    def test_gradient_is_real(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illum = make_fixture(water, rng, grid, n_det=6)
        grad, _ = grad_Dp(kern, det, f, illum, TIGHT, TIGHT)
        assert grad.dtype == np.float64


class TestGradSubset:
    def _illums(self, water, rng, grid, count):
        out = []
        det = None
        f = random_potential(grid, water, rng)
        for i in range(count):
            angle = -0.4 + 0.8 * i / max(count - 1, 1)
            fi, det_i, illum = make_fixture(water, rng, grid, angle=angle)
            det = det_i
            out.append(illum)
        return f, det, out

    def test_full_set_equals_sequential_sum(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illums = self._illums(water, rng, grid, 3)
        budget = SolverBudget(400, 1e-10)
        report = grad_D_subset(kern, det, f, illums, range(3), budget, budget, workers=1)
        total = np.zeros(grid.n_pixels)
        fid = 0.0
        for illum in illums:
            g, d = grad_Dp(kern, det, f, illum, budget, budget)
            total += g
            fid += d
        np.testing.assert_array_equal(report.grad, total)
        assert report.fidelity == fid

    def test_singleton_subset(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illums = self._illums(water, rng, grid, 3)
        budget = SolverBudget(400, 1e-10)
        report = grad_D_subset(kern, det, f, illums, [1], budget, budget)
        g, d = grad_Dp(kern, det, f, illums[1], budget, budget)
        np.testing.assert_array_equal(report.grad, g)
        assert report.fidelity == d

    def test_disjoint_subsets_add(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illums = self._illums(water, rng, grid, 4)
        budget = SolverBudget(400, 1e-10)
        r_a = grad_D_subset(kern, det, f, illums, [0, 2], budget, budget)
        r_b = grad_D_subset(kern, det, f, illums, [1, 3], budget, budget)
        r_all = grad_D_subset(kern, det, f, illums, range(4), budget, budget)
        assert np.max(np.abs(r_a.grad + r_b.grad - r_all.grad)) <= 1e-12 * np.max(np.abs(r_all.grad))

    def test_deterministic_and_thread_invariant(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illums = self._illums(water, rng, grid, 4)
        budget = SolverBudget(200, 1e-8)
        r1 = grad_D_subset(kern, det, f, illums, [0, 1, 3], budget, budget, workers=1)
        r2 = grad_D_subset(kern, det, f, illums, [3, 0, 1], budget, budget, workers=4)
        np.testing.assert_array_equal(r1.grad, r2.grad)
        assert r1.fidelity == r2.fidelity
        assert r1.subset == r2.subset == (0, 1, 3)

    def test_empty_subset_rejected(self, water, rng):
        grid = Grid2D(8, 1.0)
        kern = build_green_kernel(grid, water)
        f, det, illums = self._illums(water, rng, grid, 2)
        with pytest.raises(ValueError):
            grad_D_subset(kern, det, f, illums, [], SolverBudget(), SolverBudget())


class TestSubsetSchedule:
    def test_epoch_covers_every_illumination(self):
        sched = subset_schedule(31, 8, seed=7)
        seen = []
        for _ in range(4):  # ceil(31/8) = 4 blocks per epoch
            seen.extend(next(sched))
        assert sorted(seen) == list(range(31))

    def test_deterministic_given_seed(self):
        a = subset_schedule(10, 3, seed=42)
        b = subset_schedule(10, 3, seed=42)
        for _ in range(10):
            assert next(a) == next(b)

    def test_bad_size_rejected(self):
        with pytest.raises(ValueError):
            next(subset_schedule(4, 5, seed=0))
