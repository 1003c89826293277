"""Nonlinear scattering forward model.

The total field obeys the fixed-point relation ``u = u_in + G(f * u)``,
so computing it means inverting ``A(f) = I - G diag(f)``.  That inverse
is posed as the least-squares problem ``min_u ||A(f) u - u_in||^2`` and
solved iteratively, either by conjugate gradient on the normal equations
(CGNR; A is non-Hermitian) or by Nesterov-accelerated gradient descent
with a backtracked step.  Detector measurements follow as
``y = Gt (f * u) + u_in|_Gamma`` with the dense detector operator Gt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, Grid2D, PhysicsParams, ScatteringPotential
from .greens import DetectorOperator, GreenKernel, _convolve

__all__ = [
    "SolverBudget",
    "ForwardSolveReport",
    "ls_apply",
    "ls_apply_adjoint",
    "solve_forward_cg",
    "solve_forward_nagd",
    "measure",
    "relative_error",
    "plane_wave",
]


@dataclass(frozen=True)
class SolverBudget:
    """Iteration cap plus relative-change stopping tolerance."""

    max_iters: int = 120
    rel_change_tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_change_tol > 0:
            raise ValueError("rel_change_tol must be > 0")


@dataclass(frozen=True)
class ForwardSolveReport:
    """Last accepted iterate plus termination bookkeeping."""

    field: ComplexField
    iterations: int
    final_step_change: float
    residual_norm: float


def _check_pair(kernel: GreenKernel, f: ScatteringPotential, u_grid: Grid2D) -> None:
    if f.grid != kernel.grid or u_grid != kernel.grid:
        raise ValueError("kernel, potential, and field grids must match")


def _ls_apply_raw(kernel: GreenKernel, fv: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u - _convolve(kernel, fv * u, kernel.padded_spectrum)


def _ls_adjoint_raw(kernel: GreenKernel, fv: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u - fv * _convolve(kernel, u, kernel._adjoint_spectrum)


def ls_apply(kernel: GreenKernel, f: ScatteringPotential, u: ComplexField) -> ComplexField:
    """Apply ``A(f) = I - G diag(f)``."""
    _check_pair(kernel, f, u.grid)
    return ComplexField(kernel.grid, _ls_apply_raw(kernel, f.values, u.values))


def ls_apply_adjoint(kernel: GreenKernel, f: ScatteringPotential, u: ComplexField) -> ComplexField:
    """Apply ``A(f)^H = I - diag(f) G^H`` (f is real)."""
    _check_pair(kernel, f, u.grid)
    return ComplexField(kernel.grid, _ls_adjoint_raw(kernel, f.values, u.values))


def _cgnr(apply_a, apply_ah, b, x0, budget, callback=None):
    """CG on the normal equations A^H A x = A^H b.

    Returns (x, iterations, final_step_change, residual_norm).  The
    callback, if given, sees every accepted iterate and may return a
    truthy value to stop early.
    """
    x = np.array(x0, dtype=np.complex128)
    r = b - apply_a(x)
    s = apply_ah(r)
    p = s.copy()
    gamma = float(np.vdot(s, s).real)
    step_change = 0.0
    iters = 0
    for k in range(1, budget.max_iters + 1):
        if gamma == 0.0:
            break
        q = apply_a(p)
        qq = float(np.vdot(q, q).real)
        if qq == 0.0:
            break
        alpha = gamma / qq
        prev_norm = float(np.linalg.norm(x))
        x += alpha * p
        r -= alpha * q
        s = apply_ah(r)
        gamma_new = float(np.vdot(s, s).real)
        if not math.isfinite(gamma_new):
            raise FloatingPointError(
                f"CGNR diverged at iteration {k} (non-finite normal residual)"
            )
        step_change = alpha * float(np.linalg.norm(p))
        step_change = step_change / prev_norm if prev_norm > 0 else math.inf
        iters = k
        if callback is not None and callback(k, x):
            break
        if step_change < budget.rel_change_tol:
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    residual = float(np.linalg.norm(b - apply_a(x)))
    return x, iters, step_change, residual


def _estimate_lipschitz(apply_a, apply_ah, n: int, iters: int = 10) -> float:
    """Largest eigenvalue of A^H A by power iteration (deterministic start)."""
    rng = np.random.Generator(np.random.PCG64(0x0D7))
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = apply_ah(apply_a(v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam


def _nagd(apply_a, apply_ah, b, x0, budget, callback=None):
    """Nesterov-accelerated descent on 0.5 ||A x - b||^2.

    Step starts at 1/L (L from 10 power iterations); whenever the
    objective increases the step is halved and the momentum restarted.
    """
    x = np.array(x0, dtype=np.complex128)
    step = 1.0 / _estimate_lipschitz(apply_a, apply_ah, x.size)
    y = x.copy()
    t = 1.0
    r = apply_a(x) - b
    obj = 0.5 * float(np.vdot(r, r).real)
    step_change = 0.0
    iters = 0
    for k in range(1, budget.max_iters + 1):
        g = apply_ah(apply_a(y) - b)
        x_new = y - step * g
        r_new = apply_a(x_new) - b
        obj_new = 0.5 * float(np.vdot(r_new, r_new).real)
        if not math.isfinite(obj_new):
            raise FloatingPointError(f"NAGD diverged at iteration {k}")
        halvings = 0
        while obj_new > obj and halvings < 60:
            step *= 0.5
            t = 1.0
            g = apply_ah(apply_a(x) - b)
            x_new = x - step * g
            r_new = apply_a(x_new) - b
            obj_new = 0.5 * float(np.vdot(r_new, r_new).real)
            halvings += 1
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        moment = (t - 1.0) / t_new
        y = x_new + moment * (x_new - x)
        prev_norm = float(np.linalg.norm(x))
        dx = float(np.linalg.norm(x_new - x))
        step_change = dx / prev_norm if prev_norm > 0 else math.inf
        x = x_new
        t = t_new
        obj = obj_new
        iters = k
        if callback is not None and callback(k, x):
            break
        if step_change < budget.rel_change_tol:
            break
    residual = float(np.linalg.norm(apply_a(x) - b))
    return x, iters, step_change, residual


def _forward_solve(kernel, f, u_in, budget, driver, callback):
    _check_pair(kernel, f, u_in.grid)
    fv = f.values

    def apply_a(u):
        return _ls_apply_raw(kernel, fv, u)

    def apply_ah(u):
        return _ls_adjoint_raw(kernel, fv, u)

    x, iters, change, residual = driver(apply_a, apply_ah, u_in.values, u_in.values,
                                        budget, callback)
    return ForwardSolveReport(ComplexField(kernel.grid, x), iters, change, residual)


def solve_forward_cg(kernel: GreenKernel, f: ScatteringPotential, u_in: ComplexField,
                     budget: SolverBudget, callback=None) -> ForwardSolveReport:
    """Forward solve by CGNR, started from ``u_in`` (exact when f = 0)."""
    return _forward_solve(kernel, f, u_in, budget, _cgnr, callback)


def solve_forward_nagd(kernel: GreenKernel, f: ScatteringPotential, u_in: ComplexField,
                       budget: SolverBudget, callback=None) -> ForwardSolveReport:
    """Forward solve by Nesterov-accelerated gradient descent."""
    return _forward_solve(kernel, f, u_in, budget, _nagd, callback)


def measure(detector: DetectorOperator, f: ScatteringPotential, u: ComplexField,
            u_in_on_gamma: np.ndarray) -> np.ndarray:
    """Detector record ``y = Gt (f * u) + u_in|_Gamma``."""
    if detector.geometry.grid != f.grid or f.grid != u.grid:
        raise ValueError("detector, potential, and field grids must match")
    u_in_on_gamma = np.asarray(u_in_on_gamma, dtype=np.complex128).reshape(-1)
    if u_in_on_gamma.size != detector.geometry.n_detectors:
        raise ValueError("u_in_on_gamma length does not match detector count")
    return detector.apply(f.values * u.values) + u_in_on_gamma


def relative_error(u: ComplexField, u_ref: ComplexField) -> float:
    """Squared relative field error ``||u - u_ref||^2 / ||u_ref||^2``."""
    if u.grid != u_ref.grid:
        raise ValueError("fields live on different grids")
    ref = float(np.vdot(u_ref.values, u_ref.values).real)
    if ref == 0.0:
        raise ValueError("zero reference field")
    diff = u.values - u_ref.values
    return float(np.vdot(diff, diff).real) / ref


def plane_wave(grid: Grid2D, phys: PhysicsParams, angle: float,
               source_offset: float) -> ComplexField:
    """Unit-amplitude plane wave tilted by ``angle`` (radians) from the
    axis-0 direction, phase origin on the source line ``y = -source_offset``."""
    if not abs(angle) < math.pi / 2:
        raise ValueError("incidence angle must satisfy |angle| < pi/2")
    x, y = grid.meshgrid()
    phase = phys.k_bg * (x * math.sin(angle) + (y + source_offset) * math.cos(angle))
    return ComplexField(grid, np.exp(1j * phase).reshape(-1))
