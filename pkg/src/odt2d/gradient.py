"""Data-fidelity gradient through the closed-form Jacobian of the
forward map ``h_p(f) = diag(f) u_p(f)``.

With ``B(f) = I - G diag(f)`` the Jacobian is

    J = (I + diag(f) B(f)^{-1} G) diag(u_p(f))

so applying J or J^H costs one iterative solve with B (or B^H), the same
kind of inversion as the forward model itself.  The per-illumination
gradient is ``grad D_p = Re(J^H Gt^H (Gt diag(f) u_p - y_p^sc))`` and the
full gradient sums over illuminations, optionally over a stochastic
subset.  Per-illumination work is independent; the reduction always runs
in ascending illumination order so results are bitwise reproducible.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .forward import (
    ForwardSolveReport,
    SolverBudget,
    _cgnr,
    _ls_adjoint_raw,
    _ls_apply_raw,
    solve_forward_cg,
)
from .greens import DetectorOperator, GreenKernel, _convolve
from .grid import ComplexField, ScatteringPotential

__all__ = [
    "IlluminationRecord",
    "GradientReport",
    "jacobian_apply",
    "jacobian_adjoint_apply",
    "grad_Dp",
    "grad_D_subset",
    "subset_schedule",
    "worker_count",
]


@dataclass(frozen=True)
class IlluminationRecord:
    """One illumination: incident field on the grid, its restriction to
    the detectors, and the scattered measurement ``y_sc = y - u_in|_Gamma``."""

    u_in: ComplexField
    u_in_on_gamma: np.ndarray
    y_sc: np.ndarray
    angle: float

    def __post_init__(self) -> None:
        for name in ("u_in_on_gamma", "y_sc"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.u_in_on_gamma.size != self.y_sc.size:
            raise ValueError("detector record lengths disagree")


@dataclass(frozen=True)
class JacobianSolveReport:
    iterations: int
    final_step_change: float
    residual_norm: float


@dataclass(frozen=True)
class GradientReport:
    """Gradient over an illumination subset plus per-illumination solver
    statistics, in ascending illumination order."""

    grad: np.ndarray = field(repr=False)
    fidelity: float
    subset: tuple[int, ...]
    forward_reports: tuple[ForwardSolveReport, ...]
    jacobian_solve_reports: tuple[JacobianSolveReport, ...]


def _check(kernel: GreenKernel, f: ScatteringPotential, u_p: ComplexField) -> None:
    if f.grid != kernel.grid or u_p.grid != kernel.grid:
        raise ValueError("kernel, potential, and field grids must match")


def jacobian_apply(kernel: GreenKernel, f: ScatteringPotential, u_p: ComplexField,
                   v: np.ndarray, budget: SolverBudget | None = None) -> ComplexField:
    """Apply ``J v`` for a real direction v; u_p must be the converged
    forward solution for f."""
    _check(kernel, f, u_p)
    budget = budget or SolverBudget(max_iters=400, rel_change_tol=1e-12)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    fv = f.values
    w = u_p.values * v
    z = _convolve(kernel, w, kernel.padded_spectrum)
    s, iters, change, residual = _cgnr(
        lambda u: _ls_apply_raw(kernel, fv, u),
        lambda u: _ls_adjoint_raw(kernel, fv, u),
        z, z, budget,
    )
    if change > budget.rel_change_tol and iters >= budget.max_iters:
        raise ArithmeticError(
            f"Jacobian inner solve did not converge: residual {residual:.3e} "
            f"after {iters} iterations"
        )
    return ComplexField(kernel.grid, w + fv * s)


def jacobian_adjoint_apply(kernel: GreenKernel, f: ScatteringPotential,
                           u_p: ComplexField, w: np.ndarray,
                           budget: SolverBudget | None = None) -> np.ndarray:
    """Apply ``J^H w``; returns the complex product
    ``conj(u_p) * (w + G^H (I - diag(f) G^H)^{-1} (f * w))``.
    The gradient formula takes the real part of this."""
    _check(kernel, f, u_p)
    budget = budget or SolverBudget(max_iters=400, rel_change_tol=1e-12)
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    fv = f.values
    t = fv * w
    s, iters, change, residual = _cgnr(
        lambda u: _ls_adjoint_raw(kernel, fv, u),
        lambda u: _ls_apply_raw(kernel, fv, u),
        t, t, budget,
    )
    if change > budget.rel_change_tol and iters >= budget.max_iters:
        raise ArithmeticError(
            f"Jacobian adjoint inner solve did not converge: residual "
            f"{residual:.3e} after {iters} iterations"
        )
    return np.conj(u_p.values) * (w + _convolve(kernel, s, kernel._adjoint_spectrum))


def _grad_dp_full(kernel, detector, f, illum, budget, jac_budget):
    fwd = solve_forward_cg(kernel, f, illum.u_in, budget)
    u_p = fwd.field
    residual = detector.apply(f.values * u_p.values) - illum.y_sc
    fidelity = 0.5 * float(np.vdot(residual, residual).real)
    back = detector.apply_adjoint(residual)
    jac_budget = jac_budget or budget
    w = np.asarray(back, dtype=np.complex128)
    fv = f.values
    t = fv * w
    s, iters, change, resid = _cgnr(
        lambda u: _ls_adjoint_raw(kernel, fv, u),
        lambda u: _ls_apply_raw(kernel, fv, u),
        t, t, jac_budget,
    )
    jw = np.conj(u_p.values) * (w + _convolve(kernel, s, kernel._adjoint_spectrum))
    grad = np.real(jw)
    return grad, fidelity, fwd, JacobianSolveReport(iters, change, resid)


def grad_Dp(kernel: GreenKernel, detector: DetectorOperator, f: ScatteringPotential,
            illum: IlluminationRecord, budget: SolverBudget,
            jac_budget: SolverBudget | None = None) -> tuple[np.ndarray, float]:
    """Gradient and value of the per-illumination data term
    ``D_p = 0.5 ||Gt diag(f) u_p(f) - y_sc||^2``."""
    grad, fidelity, _, _ = _grad_dp_full(kernel, detector, f, illum, budget, jac_budget)
    return grad, fidelity


def worker_count() -> int:
    """Worker pool size: ODT_THREADS if set, else the CPU count."""
    env = os.environ.get("ODT_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def grad_D_subset(kernel: GreenKernel, detector: DetectorOperator,
                  f: ScatteringPotential, illums: list[IlluminationRecord],
                  subset, budget: SolverBudget,
                  jac_budget: SolverBudget | None = None,
                  workers: int | None = None) -> GradientReport:
    """Sum of per-illumination gradients over ``subset`` in ascending
    illumination order (deterministic regardless of worker count)."""
    subset = sorted(int(p) for p in subset)
    if not subset:
        raise ValueError("empty illumination subset")
    if subset[0] < 0 or subset[-1] >= len(illums):
        raise ValueError("subset index out of range")
    workers = worker_count() if workers is None else max(1, workers)

    def one(p):
        return _grad_dp_full(kernel, detector, f, illums[p], budget, jac_budget)

    if workers > 1 and len(subset) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, subset))
    else:
        results = [one(p) for p in subset]

    grad = np.zeros(kernel.grid.n_pixels)
    fidelity = 0.0
    for g, d, _, _ in results:
        grad += g
        fidelity += d
    return GradientReport(
        grad=grad,
        fidelity=fidelity,
        subset=tuple(subset),
        forward_reports=tuple(r[2] for r in results),
        jacobian_solve_reports=tuple(r[3] for r in results),
    )


def subset_schedule(n_illums: int, subset_size: int, seed: int):
    """Endless iterator of illumination subsets: each epoch shuffles
    [0..P) and splits it into consecutive blocks of ``subset_size``."""
    if not 1 <= subset_size <= n_illums:
        raise ValueError("subset_size must be in [1, n_illums]")
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        perm = rng.permutation(n_illums)
        for lo in range(0, n_illums, subset_size):
            yield tuple(int(p) for p in perm[lo : lo + subset_size])
