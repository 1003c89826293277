"""Outer inversion loop: accelerated forward-backward splitting.

Each iteration solves the forward model and the Jacobian-adjoint system
for every illumination in the current stochastic subset, takes a
gradient step from the extrapolated point, applies the TV+nonnegativity
prox with weight gamma * mu, and extrapolates with the chosen momentum
rule.  Everything is deterministic given the seed: the subset schedule
is seeded, and per-illumination results are reduced in a fixed order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .forward import SolverBudget, solve_forward_cg
from .gradient import grad_D_subset, subset_schedule
from .greens import DetectorGeometry, build_detector_operator, build_green_kernel
from .grid import PhysicsParams, ScatteringPotential
from .proxtv import ProxParams, prox_R, tv_value
from .sim import MeasurementSet

__all__ = [
    "MomentumRule",
    "ReconConfig",
    "ReconTrace",
    "ReconError",
    "reconstruct",
    "fidelity_and_reg",
]


@dataclass(frozen=True)
class MomentumRule:
    """Extrapolation weight sequence: the accelerated t_k rule
    (t1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2, alpha_k = (t_k - 1) / t_{k+1}),
    a constant weight, or none."""

    kind: str = "fista"
    parameter: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("fista", "constant", "none"):
            raise ValueError(f"unknown momentum rule {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.parameter < 1.0:
            raise ValueError("constant momentum parameter must be in [0, 1)")

    def weights(self):
        if self.kind == "none":
            while True:
                yield 0.0
        elif self.kind == "constant":
            while True:
                yield self.parameter
        else:
            t = 1.0
            while True:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                yield (t - 1.0) / t_next
                t = t_next


@dataclass(frozen=True)
class ReconConfig:
    """All outer-loop hyperparameters."""

    gamma: float = 5e-3
    mu: float = 3.3e-2
    outer_iters: int = 200
    subset_size: int = 8
    forward_budget: SolverBudget = SolverBudget(120, 1e-4)
    jac_budget: SolverBudget = SolverBudget(120, 1e-4)
    prox_params: ProxParams = ProxParams(mu=1.0)
    momentum: MomentumRule = MomentumRule("fista")
    seed: int = 0
    snapshot_every: int = 0

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if self.subset_size < 1:
            raise ValueError("subset_size must be >= 1")


@dataclass
class ReconTrace:
    """Per-iteration records of the outer loop."""

    iterations: list[int] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    tv: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    subsets: list[tuple[int, ...]] = field(default_factory=list)
    gamma: list[float] = field(default_factory=list)
    momentum: list[float] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "fidelity", "tv", "grad_norm", "subset"])
            for i in range(len(self.iterations)):
                writer.writerow([
                    self.iterations[i],
                    repr(self.fidelity[i]),
                    repr(self.tv[i]),
                    repr(self.grad_norm[i]),
                    ";".join(str(p) for p in self.subsets[i]),
                ])


class ReconError(RuntimeError):
    """Numeric abort; carries the trace accumulated so far."""

    def __init__(self, message: str, trace: ReconTrace):
        super().__init__(message)
        self.trace = trace


def reconstruct(data: MeasurementSet, geometry: DetectorGeometry | None,
                phys: PhysicsParams, config: ReconConfig,
                f0: ScatteringPotential) -> tuple[ScatteringPotential, ReconTrace]:
    """Run the accelerated proximal-gradient loop from f0."""
    geometry = geometry if geometry is not None else data.geometry
    grid = f0.grid
    n_illums = data.n_illuminations
    if not 1 <= config.subset_size <= n_illums:
        raise ValueError("subset_size must be in [1, number of illuminations]")
    kernel = build_green_kernel(grid, phys)
    detector = build_detector_operator(
        DetectorGeometry(geometry.positions, grid), phys)
    illums = data.illumination_records(grid, phys)

    gamma = config.gamma
    prox_base = config.prox_params
    schedule = subset_schedule(n_illums, config.subset_size, config.seed)
    weights = config.momentum.weights()

    f_prev = np.array(f0.values, dtype=np.float64)
    v = f_prev.copy()
    trace = ReconTrace()
    # The objective is monotone only in the deterministic full-batch,
    # momentum-free regime; the step-halving safeguard watches it there.
    monitor = config.momentum.kind == "none" and config.subset_size == n_illums
    prev_objective = math.inf
    halvings = 0

    for k in range(1, config.outer_iters + 1):
        subset = next(schedule)
        report = grad_D_subset(kernel, detector, ScatteringPotential(grid, v),
                               illums, subset, config.forward_budget, config.jac_budget)
        if monitor:
            # momentum is off, so v == f^{k-1}: report.fidelity is D(f^{k-1})
            objective = report.fidelity + config.mu * tv_value(v, grid)
            if objective > prev_objective and halvings < 3:
                gamma *= 0.5
                halvings += 1
                trace.events.append(f"iteration {k}: objective rose, gamma halved to {gamma:.3e}")
            prev_objective = objective
        step = v - gamma * report.grad
        f_new = prox_R(step, replace(prox_base, mu=gamma * config.mu))
        if not np.all(np.isfinite(f_new)):
            raise ReconError(f"non-finite iterate at outer iteration {k}", trace)
        alpha = next(weights)
        v = f_new + alpha * (f_new - f_prev)

        trace.iterations.append(k)
        trace.fidelity.append(report.fidelity)
        trace.tv.append(tv_value(f_new, grid))
        trace.grad_norm.append(float(np.linalg.norm(report.grad)))
        trace.subsets.append(report.subset)
        trace.gamma.append(gamma)
        trace.momentum.append(alpha)
        if config.snapshot_every and k % config.snapshot_every == 0:
            trace.snapshots[k] = f_new.copy()
        f_prev = f_new

    return ScatteringPotential(grid, f_prev), trace


def fidelity_and_reg(f: ScatteringPotential, data: MeasurementSet,
                     geometry: DetectorGeometry | None, phys: PhysicsParams,
                     config: ReconConfig) -> tuple[float, float, bool]:
    """Data fidelity over all illuminations, the TV value, and a
    nonnegativity feasibility flag (instead of an infinite indicator)."""
    geometry = geometry if geometry is not None else data.geometry
    grid = f.grid
    kernel = build_green_kernel(grid, phys)
    detector = build_detector_operator(DetectorGeometry(geometry.positions, grid), phys)
    fidelity = 0.0
    for illum in data.illumination_records(grid, phys):
        u_p = solve_forward_cg(kernel, f, illum.u_in, config.forward_budget).field
        residual = detector.apply(f.values * u_p.values) - illum.y_sc
        fidelity += 0.5 * float(np.vdot(residual, residual).real)
    feasible = bool(np.all(f.values >= 0.0))
    return fidelity, tv_value(f.values, grid), feasible
