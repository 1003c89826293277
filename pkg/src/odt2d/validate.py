"""Forward-solver validation against the analytic cylinder solution.

For a homogeneous bead the analytic total field is known, so each
solver iterate u^k can be scored by the squared relative error
``eps_k = ||u^k - u_ref||^2 / ||u_ref||^2`` and solvers compared by
``k_eps0``, the first iteration at which eps_k drops below a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import SolverBudget, plane_wave, solve_forward_cg, solve_forward_nagd
from .greens import GreenKernel, build_green_kernel
from .grid import ComplexField, Grid2D, PhysicsParams, potential_from_ri
from .mie import BeadSpec, MieSolution, mie_total_field
from .sim import bead_phantom

__all__ = ["BeadConvergenceResult", "bead_convergence", "bead_for_contrast", "first_below"]

_SOLVERS = {"cg": solve_forward_cg, "nagd": solve_forward_nagd}


@dataclass(frozen=True)
class BeadConvergenceResult:
    solver: str
    contrast: float
    eps: tuple[float, ...]
    k_eps0: int | None
    mie: MieSolution


def first_below(values, threshold: float) -> int | None:
    """1-based index of the first entry at or below the threshold."""
    for i, v in enumerate(values, start=1):
        if v <= threshold:
            return i
    return None


def bead_convergence(solver: str, grid: Grid2D, phys: PhysicsParams, bead: BeadSpec,
                     angle: float, max_iters: int, epsilon0: float,
                     kernel: GreenKernel | None = None,
                     mie: MieSolution | None = None,
                     stop_at_epsilon0: bool = True) -> BeadConvergenceResult:
    """Run one forward solver on the bead fixture, scoring every iterate
    against the analytic field; optionally stop at the first crossing."""
    if solver not in _SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    source_offset = grid.side_len / 2.0
    if mie is None:
        mie = mie_total_field(bead, phys, grid, angle, source_offset=source_offset)
    if kernel is None:
        kernel = build_green_kernel(grid, phys)
    f = potential_from_ri(bead_phantom(grid, bead, phys), phys)
    u_in = plane_wave(grid, phys, angle, source_offset)
    ref = mie.field.values
    ref_norm = float(np.vdot(ref, ref).real)
    eps: list[float] = []

    def track(_k, u):
        diff = u - ref
        eps.append(float(np.vdot(diff, diff).real) / ref_norm)
        return stop_at_epsilon0 and eps[-1] <= epsilon0

    budget = SolverBudget(max_iters=max_iters, rel_change_tol=1e-14)
    _SOLVERS[solver](kernel, f, u_in, budget, callback=track)
    return BeadConvergenceResult(solver, _bead_contrast(bead, phys), tuple(eps),
                                 first_below(eps, epsilon0), mie)


def _bead_contrast(bead: BeadSpec, phys: PhysicsParams) -> float:
    return (bead.n_bead ** 2 - phys.n_b ** 2) / phys.n_b ** 2


def bead_for_contrast(contrast: float, phys: PhysicsParams, radius: float,
                      center: tuple[float, float] = (0.0, 0.0)) -> BeadSpec:
    """Bead whose exact contrast max|f| / (k0^2 n_b^2) is the given value."""
    if contrast < 0:
        raise ValueError("contrast must be nonnegative")
    return BeadSpec(radius, phys.n_b * math.sqrt(1.0 + contrast), center)
