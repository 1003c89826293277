import numpy as np
import pytest

from odt2d.grid import Grid2D
from odt2d.proxtv import (
    ProxParams,
    div_op,
    fourier_solve_A,
    grad_op,
    prox_R,
    prox_R_info,
    prox_group_l21,
    prox_nonneg,
    tv_value,
)

from oracles import projected_subgradient_tv, tv_objective


class TestGradDiv:
    def test_constant_has_zero_gradient(self):
        grid = Grid2D(8, 1.0)
        g = grad_op(np.full(64, 3.7), grid)
        np.testing.assert_array_equal(g, np.zeros((64, 2)))

    def test_adjoint_identity(self, rng):
        grid = Grid2D(16, 1.0)
        f = rng.standard_normal(256)
        q = rng.standard_normal((256, 2))
        lhs = float(np.sum(grad_op(f, grid) * q))
        rhs = float(np.sum(f * -div_op(q, grid)))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_impulse_laplacian(self):
        grid = Grid2D(8, 1.0)
        f = np.zeros(64)
        f[3 * 8 + 4] = 1.0
        lap = -div_op(grad_op(f, grid), grid)
        assert lap[3 * 8 + 4] == pytest.approx(4.0)
        assert np.sum(lap) == pytest.approx(0.0, abs=1e-12)

    def test_tv_of_constant_is_zero(self):
        grid = Grid2D(8, 1.0)
        assert tv_value(np.full(64, 2.0), grid) == 0.0


class TestProxNonneg:
    def test_examples(self):
        np.testing.assert_array_equal(prox_nonneg(np.array([-1.0, 2.0])), [0.0, 2.0])
        q = np.array([0.5, 1.5, 0.0])
        np.testing.assert_array_equal(prox_nonneg(q), q)

    def test_idempotent(self, rng):
        q = rng.standard_normal(50)
        once = prox_nonneg(q)
        np.testing.assert_array_equal(prox_nonneg(once), once)


class TestProxGroupL21:
    def test_three_four_row(self):
        out = prox_group_l21(np.array([[3.0, 4.0]]), 1.0)
        np.testing.assert_allclose(out, [[2.4, 3.2]], rtol=1e-14)

    def test_small_rows_clamp_to_zero(self):
        out = prox_group_l21(np.array([[0.3, 0.4], [0.0, 0.0]]), 1.0)
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_tiny_gamma_is_identity(self, rng):
        q = rng.standard_normal((20, 2))
        out = prox_group_l21(q, 1e-15)
        np.testing.assert_allclose(out, q, rtol=1e-12)


class TestFourierSolve:
    def test_zero(self):
        grid = Grid2D(8, 1.0)
        np.testing.assert_array_equal(fourier_solve_A(np.zeros(64), 1.0, 1.0, grid),
                                      np.zeros(64))

    def test_constant_dc_response(self):
        grid = Grid2D(8, 1.0)
        rho2 = 0.7
        out = fourier_solve_A(np.full(64, 2.0), 1.3, rho2, grid)
        np.testing.assert_allclose(out, np.full(64, 2.0 / (1 + rho2)), rtol=1e-12)

    def test_matches_dense_solve(self, rng):
        grid = Grid2D(16, 1.0)
        n = 256
        rho1, rho2 = 0.8, 1.7
        lap = np.zeros((n, n))
        for col in range(n):
            e = np.zeros(n)
            e[col] = 1.0
            lap[:, col] = -div_op(grad_op(e, grid), grid)
        a_mat = (1 + rho2) * np.eye(n) + rho1 * lap
        rhs = rng.standard_normal(n)
        ref = np.linalg.solve(a_mat, rhs)
        out = fourier_solve_A(rhs, rho1, rho2, grid)
        assert np.linalg.norm(out - ref) / np.linalg.norm(ref) < 1e-10

    def test_apply_then_solve_is_identity(self, rng):
        grid = Grid2D(16, 1.0)
        rho1, rho2 = 1.0, 1.0
        x = rng.standard_normal(256)
        ax = (1 + rho2) * x + rho1 * -div_op(grad_op(x, grid), grid)
        back = fourier_solve_A(ax, rho1, rho2, grid)
        assert np.linalg.norm(back - x) / np.linalg.norm(x) < 1e-10

    def test_residual_contract(self, rng):
        grid = Grid2D(16, 1.0)
        rho1, rho2 = 0.5, 2.0
        rhs = rng.standard_normal(256)
        x = fourier_solve_A(rhs, rho1, rho2, grid)
        ax = (1 + rho2) * x + rho1 * -div_op(grad_op(x, grid), grid)
        assert np.linalg.norm(ax - rhs) / np.linalg.norm(rhs) <= 1e-10


class TestProxR:
    def test_vanishing_tv_weight_is_projection(self, rng):
        v = rng.standard_normal(64)
        out = prox_R(v, ProxParams(mu=1e-12, max_iters=400, rel_tol=1e-12))
        np.testing.assert_allclose(out, np.maximum(v, 0.0), atol=1e-6)

    def test_positive_constant_is_fixed_point(self):
        v = np.full(64, 1.5)
        out = prox_R(v, ProxParams(mu=0.1))
        np.testing.assert_allclose(out, v, atol=1e-10)

    def test_output_feasible(self, rng):
        v = rng.standard_normal(64)
        out = prox_R(v, ProxParams(mu=0.2))
        assert np.all(out >= 0.0)

    def test_objective_against_subgradient_oracle(self, rng):
        n = 8
        v = rng.standard_normal(n * n)
        mu = 0.1
        out = prox_R(v, ProxParams(mu=mu, max_iters=4000, rel_tol=1e-12))
        _, oracle_obj = projected_subgradient_tv(v, mu, n, iters=50_000)
        ours = tv_objective(out, v, mu, n)
        assert ours <= oracle_obj * (1 + 1e-3)
        assert abs(ours - oracle_obj) / oracle_obj < 1e-3

    def test_beats_feasible_competitors(self, rng):
        n = 8
        mu = 0.15
        for _ in range(5):
            v = rng.standard_normal(n * n)
            out = prox_R(v, ProxParams(mu=mu, max_iters=2000, rel_tol=1e-10))
            ours = tv_objective(out, v, mu, n)
            assert ours <= tv_objective(np.maximum(v, 0.0), v, mu, n) + 1e-12
            assert ours <= tv_objective(np.zeros(n * n), v, mu, n) + 1e-12

    def test_firmly_nonexpansive_spot_check(self, rng):
        n = 8
        params = ProxParams(mu=0.1, max_iters=2000, rel_tol=1e-11)
        for _ in range(5):
            a = rng.standard_normal(n * n)
            b = rng.standard_normal(n * n)
            pa = prox_R(a, params)
            pb = prox_R(b, params)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) * (1 + 1e-8)

    def test_primal_residuals_shrink(self, rng):
        n = 32
        v = rng.standard_normal(n * n) + np.linspace(0, 1, n * n)
        params = ProxParams(mu=0.05, max_iters=300, rel_tol=0.0)
        _, info = prox_R_info(v, params)
        v_norm = np.linalg.norm(v)
        assert info["primal_residual_grad"][-1] < 1e-5 * v_norm
        assert info["primal_residual_nonneg"][-1] < 1e-5 * v_norm

    def test_nan_input_aborts(self):
        v = np.full(16, np.nan)
        with pytest.raises(FloatingPointError):
            prox_R(v, ProxParams(mu=0.1))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            ProxParams(mu=-1.0)
        with pytest.raises(ValueError):
            ProxParams(mu=1.0, rho1=0.0)
