"""Proximity operator of the regularizer: nonnegativity indicator plus
isotropic total variation ``||grad f||_{2,1}``, computed by ADMM.

The splitting introduces q1 = grad f and q2 = f; both sub-proxes are
closed-form (rowwise shrinkage of the gradient 2-norm, projection onto
the nonnegative orthant), and the f-update solves

    ((1 + rho2) I + rho1 grad^T grad) f = rhs

exactly by division in the Fourier domain, which requires the periodic
forward-difference gradient used throughout this module.  The ADMM
iterate f^k is only asymptotically feasible, so the returned array is
clamped to the nonnegative orthant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid2D

__all__ = [
    "ProxParams",
    "grad_op",
    "div_op",
    "tv_value",
    "prox_nonneg",
    "prox_group_l21",
    "fourier_solve_A",
    "prox_R",
    "prox_R_info",
]


@dataclass(frozen=True)
class ProxParams:
    """ADMM settings; ``mu`` is the full prox weight (step times
    regularization strength in the outer loop)."""

    mu: float
    rho1: float = 1.0
    rho2: float = 1.0
    max_iters: int = 200
    rel_tol: float = 1e-5

    def __post_init__(self) -> None:
        if not (self.mu > 0 and self.rho1 > 0 and self.rho2 > 0):
            raise ValueError("mu, rho1, rho2 must all be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _image(f: np.ndarray, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.size != n * n:
        raise ValueError(f"expected {n * n} samples, got {f.size}")
    return f.reshape(n, n)


def _side(n_pixels: int) -> int:
    n = math.isqrt(n_pixels)
    if n * n != n_pixels:
        raise ValueError("flat image length is not a perfect square")
    return n


def grad_op(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Forward differences with periodic boundary, shaped (N, 2)."""
    img = _image(f, grid.n_side)
    d0 = np.roll(img, -1, axis=0) - img
    d1 = np.roll(img, -1, axis=1) - img
    return np.stack([d0.reshape(-1), d1.reshape(-1)], axis=1)


def div_op(q: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Periodic divergence, the negative adjoint of :func:`grad_op`."""
    return -_grad_adjoint(q, grid.n_side)


def _grad_adjoint(q: np.ndarray, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (n * n, 2):
        raise ValueError(f"expected gradient field of shape ({n * n}, 2)")
    q0 = q[:, 0].reshape(n, n)
    q1 = q[:, 1].reshape(n, n)
    out = np.roll(q0, 1, axis=0) - q0 + np.roll(q1, 1, axis=1) - q1
    return out.reshape(-1)


def tv_value(f: np.ndarray, grid: Grid2D) -> float:
    """Isotropic TV: sum over pixels of the gradient 2-norm."""
    g = grad_op(f, grid)
    return float(np.sum(np.hypot(g[:, 0], g[:, 1])))


def prox_nonneg(q: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant, componentwise max(q, 0)."""
    return np.maximum(np.asarray(q, dtype=np.float64), 0.0)


def prox_group_l21(q: np.ndarray, gamma: float) -> np.ndarray:
    """Rowwise shrinkage ``q_n (1 - gamma / ||q_n||)_+`` (zero rows stay zero)."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    q = np.asarray(q, dtype=np.float64)
    norms = np.linalg.norm(q, axis=-1, keepdims=True)
    factor = np.where(norms > 0, np.maximum(1.0 - gamma / np.where(norms > 0, norms, 1.0), 0.0), 0.0)
    return q * factor


def _laplacian_eigenvalues(n: int) -> np.ndarray:
    freq = np.arange(n)
    s = 4.0 * np.sin(math.pi * freq / n) ** 2
    return s[:, None] + s[None, :]


def fourier_solve_A(rhs: np.ndarray, rho1: float, rho2: float, grid: Grid2D) -> np.ndarray:
    """Solve ``((1 + rho2) I + rho1 grad^T grad) x = rhs`` by Fourier division."""
    if not (rho1 > 0 and rho2 > 0):
        raise ValueError("rho1 and rho2 must be positive")
    n = grid.n_side
    img = _image(rhs, n)
    denom = (1.0 + rho2) + rho1 * _laplacian_eigenvalues(n)
    out = np.fft.ifft2(np.fft.fft2(img) / denom).real
    return out.reshape(-1)


def prox_R_info(v: np.ndarray, params: ProxParams) -> tuple[np.ndarray, dict]:
    """ADMM iterations for the prox, returning the clamped output along
    with iteration count and primal-residual histories."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    n = _side(v.size)
    grid = Grid2D(n, float(n))  # only n_side matters for the difference stencils
    denom = (1.0 + params.rho2) + params.rho1 * _laplacian_eigenvalues(n)

    f = v.copy()
    q1 = grad_op(f, grid)
    q2 = f.copy()
    w1 = q1.copy()
    w2 = q2.copy()
    res1_hist: list[float] = []
    res2_hist: list[float] = []
    iters = 0
    for k in range(1, params.max_iters + 1):
        q1 = prox_group_l21(grad_op(f, grid) + w1 / params.rho1, params.mu / params.rho1)
        q2 = prox_nonneg(f + w2 / params.rho2)
        rhs = v + _grad_adjoint(params.rho1 * q1 - w1, n) + params.rho2 * q2 - w2
        f_new = np.fft.ifft2(np.fft.fft2(rhs.reshape(n, n)) / denom).real.reshape(-1)
        if not np.all(np.isfinite(f_new)):
            raise FloatingPointError(f"prox ADMM produced non-finite values at iteration {k}")
        g_new = grad_op(f_new, grid)
        w1 = w1 + params.rho1 * (g_new - q1)
        w2 = w2 + params.rho2 * (f_new - q2)
        res1_hist.append(float(np.linalg.norm(g_new - q1)))
        res2_hist.append(float(np.linalg.norm(f_new - q2)))
        prev_norm = float(np.linalg.norm(f))
        change = float(np.linalg.norm(f_new - f))
        f = f_new
        iters = k
        if change <= params.rel_tol * prev_norm:
            break
    info = {"iterations": iters, "primal_residual_grad": res1_hist,
            "primal_residual_nonneg": res2_hist}
    return np.maximum(f, 0.0), info


def prox_R(v: np.ndarray, params: ProxParams) -> np.ndarray:
    """Proximity operator of ``mu ||grad .||_{2,1} + i_{>=0}`` at v."""
    out, _ = prox_R_info(v, params)
    return out
