"""Command-line entry points.

Subcommands: simulate, forward, reconstruct, validate-mie, bench,
predict-memory.  Exit codes: 0 success, 2 configuration error, 3 data
inconsistency, 4 validation failure, 5 numeric abort.  The worker count
comes from --threads or the ODT_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time

import numpy as np

from . import io as odtio
from .forward import SolverBudget, plane_wave, solve_forward_cg
from .greens import build_green_kernel
from .grid import Grid2D, PhysicsParams, ScatteringPotential, ri_from_potential
from .mie import BeadSpec
from .proxtv import ProxParams
from .recon import MomentumRule, ReconConfig, ReconError, reconstruct
from .sim import SimProtocol, bead_phantom, predict_memory_delta, shepp_logan, simulate
from .validate import bead_convergence, bead_for_contrast

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_VALIDATION = 4
EXIT_NUMERIC = 5


class ValidationFailure(RuntimeError):
    pass


def _load_config(args) -> dict:
    cfg = odtio.parse_config_file(args.config) if args.config else odtio.default_config()
    if getattr(args, "seed", None) is not None:
        cfg["recon_seed"] = args.seed
    return cfg


def _physics(cfg: dict) -> PhysicsParams:
    return PhysicsParams(wavelength=cfg["wavelength"], n_b=cfg["n_background"])


def _sim_protocol(cfg: dict) -> SimProtocol:
    n = cfg["sim_num_angles"]
    lo = math.radians(cfg["sim_angle_min_deg"])
    hi = math.radians(cfg["sim_angle_max_deg"])
    angles = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    return SimProtocol(
        angles=tuple(float(a) for a in angles),
        fine_grid=Grid2D(cfg["sim_fine_n"], cfg["sim_side_len"]),
        source_distance=cfg["sim_source_distance"],
        detector_sides=tuple(cfg["sim_detector_sides"].split(",")),
        detector_samples=cfg["sim_detector_samples"],
        downsample_to=cfg["sim_downsample_to"],
    )


def _phantom(cfg: dict, grid: Grid2D, phys: PhysicsParams):
    kind = cfg["phantom"]
    if kind == "shepp-logan":
        extent = cfg["phantom_extent"] or None
        return shepp_logan(grid, cfg["phantom_contrast"], phys, extent=extent)
    if kind == "bead":
        bead = bead_for_contrast(cfg["phantom_contrast"], phys, cfg["bead_radius"],
                                 (cfg["bead_center_x"], cfg["bead_center_y"]))
        return bead_phantom(grid, bead, phys)
    raise odtio.ConfigError(f"unknown phantom kind {kind!r}")


def _recon_config(cfg: dict) -> ReconConfig:
    return ReconConfig(
        gamma=cfg["recon_gamma"],
        mu=cfg["recon_mu"],
        outer_iters=cfg["recon_outer_iters"],
        subset_size=cfg["recon_subset_size"],
        forward_budget=SolverBudget(cfg["forward_max_iters"], cfg["forward_tol"]),
        jac_budget=SolverBudget(cfg["jac_max_iters"], cfg["jac_tol"]),
        prox_params=ProxParams(mu=1.0, rho1=cfg["prox_rho1"], rho2=cfg["prox_rho2"],
                               max_iters=cfg["prox_max_iters"], rel_tol=cfg["prox_tol"]),
        momentum=MomentumRule(cfg["recon_momentum"], cfg["recon_momentum_parameter"]),
        seed=cfg["recon_seed"],
        snapshot_every=cfg["recon_snapshot_every"],
    )


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    phys = _physics(cfg)
    protocol = _sim_protocol(cfg)
    phantom = _phantom(cfg, protocol.fine_grid, phys)
    budget = SolverBudget(cfg["sim_forward_max_iters"], cfg["sim_forward_tol"])
    ms = simulate(phantom, protocol, phys, budget)
    odtio.write_measurements(f"{args.out}_measurements.odtm", ms)
    odtio.write_field(f"{args.out}_phantom.odtf", phantom.image)
    sc_norm = max(float(np.linalg.norm(r.y - r.u_in_on_gamma)) for r in ms.records)
    print(f"simulated {ms.n_illuminations} illuminations x {ms.n_detectors} detectors "
          f"on a {protocol.fine_grid.n_side}^2 grid (max ||y_sc|| = {sc_norm:.4g})")
    print(f"wrote {args.out}_measurements.odtm and {args.out}_phantom.odtf")
    return EXIT_OK


def cmd_forward(args) -> int:
    cfg = _load_config(args)
    phys = _physics(cfg)
    grid = Grid2D(cfg["sim_fine_n"], cfg["sim_side_len"])
    phantom = _phantom(cfg, grid, phys)
    from .grid import potential_from_ri

    f = potential_from_ri(phantom, phys)
    kernel = build_green_kernel(grid, phys)
    u_in = plane_wave(grid, phys, math.radians(cfg["forward_angle_deg"]),
                      cfg["sim_source_distance"])
    budget = SolverBudget(cfg["sim_forward_max_iters"], cfg["sim_forward_tol"])
    report = solve_forward_cg(kernel, f, u_in, budget)
    odtio.write_field(f"{args.out}_field.odtf", report.field.image)
    print(f"forward solve: {report.iterations} iterations, "
          f"relative change {report.final_step_change:.3e}, "
          f"residual {report.residual_norm:.3e}")
    print(f"wrote {args.out}_field.odtf")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    phys = _physics(cfg)
    ms = odtio.read_measurements(args.measurements)
    grid = Grid2D(cfg["recon_n"], cfg["recon_side_len"])
    if grid.side_len > ms.geometry.grid.side_len:
        raise odtio.DataInconsistencyError(
            "reconstruction region is larger than the measured region")
    config = _recon_config(cfg)
    if config.subset_size > ms.n_illuminations:
        raise odtio.DataInconsistencyError(
            f"subset size {config.subset_size} exceeds the "
            f"{ms.n_illuminations} available illuminations")
    f0 = ScatteringPotential(grid, np.zeros(grid.n_pixels))
    f_hat, trace = reconstruct(ms, None, phys, config, f0)
    odtio.write_field(f"{args.out}_fhat.odtf", f_hat.image)
    trace.write_csv(f"{args.out}_trace.csv")
    odtio.write_pgm(f"{args.out}_n.pgm", ri_from_potential(f_hat, phys).image)
    for k, snap in trace.snapshots.items():
        odtio.write_field(f"{args.out}_snapshot_{k:06d}.odtf",
                          snap.reshape(grid.n_side, grid.n_side))
    print(f"reconstructed {grid.n_side}^2 potential in {config.outer_iters} iterations "
          f"(final fidelity {trace.fidelity[-1]:.6g}, TV {trace.tv[-1]:.6g})")
    print(f"wrote {args.out}_fhat.odtf, {args.out}_trace.csv, {args.out}_n.pgm")
    return EXIT_OK


def cmd_validate_mie(args) -> int:
    cfg = _load_config(args)
    phys = _physics(cfg)
    grid = Grid2D(cfg["mie_n"], cfg["mie_side_len"])
    angle = math.radians(cfg["mie_angle_deg"])
    contrasts = [float(c) for c in cfg["mie_contrasts"].split(",")]
    eps0 = cfg["mie_epsilon0"]
    kernel = build_green_kernel(grid, phys)
    rows = []
    summary = []
    for c in contrasts:
        bead = bead_for_contrast(c, phys, cfg["mie_radius"])
        results = {}
        mie = None
        for solver, cap in (("cg", cfg["mie_cg_max_iters"]),
                            ("nagd", cfg["mie_nagd_max_iters"])):
            res = bead_convergence(solver, grid, phys, bead, angle, cap, eps0,
                                   kernel=kernel, mie=mie)
            mie = res.mie
            results[solver] = res
            rows.extend((solver, c, k, e) for k, e in enumerate(res.eps, start=1))
        summary.append((c, results["cg"].k_eps0, results["nagd"].k_eps0,
                        mie.truncation_order, mie.coeff_residual))
    with open(f"{args.out}_mie_convergence.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "contrast", "iteration", "eps"])
        for row in rows:
            writer.writerow([row[0], repr(row[1]), row[2], repr(row[3])])
    print(f"{'contrast':>9} {'k_cg':>6} {'k_nagd':>7} {'order':>6} {'residual':>10}")
    for c, kcg, knagd, order, residual in summary:
        print(f"{c:9.2f} {kcg if kcg else '-':>6} {knagd if knagd else '-':>7} "
              f"{order:>6} {residual:10.2e}")
    print(f"wrote {args.out}_mie_convergence.csv")
    if any(kcg is None or knagd is None for _, kcg, knagd, _, _ in summary):
        raise ValidationFailure("a solver failed to reach the error threshold")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    phys = _physics(cfg)
    grid = Grid2D(cfg["sim_fine_n"], cfg["sim_side_len"])
    repeats = cfg["bench_repeats"]
    phantom = _phantom(cfg, grid, phys)
    from .grid import potential_from_ri
    from .greens import apply_G
    from .grid import ComplexField

    f = potential_from_ri(phantom, phys)
    t0 = time.perf_counter()
    kernel = build_green_kernel(grid, phys)
    t_build = time.perf_counter() - t0
    u_in = plane_wave(grid, phys, 0.0, cfg["sim_source_distance"])
    t0 = time.perf_counter()
    for _ in range(repeats):
        apply_G(kernel, u_in)
    t_apply = (time.perf_counter() - t0) / repeats
    budget = SolverBudget(cfg["forward_max_iters"], cfg["forward_tol"])
    t0 = time.perf_counter()
    report = solve_forward_cg(kernel, f, u_in, budget)
    t_solve = time.perf_counter() - t0
    print(f"grid {grid.n_side}^2 over {grid.side_len} wavelengths")
    print(f"kernel build      {t_build * 1e3:9.2f} ms")
    print(f"kernel apply      {t_apply * 1e3:9.2f} ms")
    print(f"forward solve     {t_solve * 1e3:9.2f} ms ({report.iterations} iterations)")
    return EXIT_OK


def cmd_predict_memory(args) -> int:
    delta = predict_memory_delta(args.n_pixels, args.k_iters, args.n_threads)
    print(f"{delta} B ({odtio.format_bytes(delta)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odt2d",
        description="2-D diffraction tomography: simulate, reconstruct, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value configuration file")
    common.add_argument("--out", metavar="PREFIX", default="odt2d_out",
                        help="output path prefix")
    common.add_argument("--seed", type=int, metavar="U64", help="override recon_seed")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker count (overrides ODT_THREADS)")

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate multi-angle measurements of the configured phantom")
    p.set_defaults(handler=cmd_simulate)
    p = sub.add_parser("forward", parents=[common],
                       help="run a single forward solve and store the total field")
    p.set_defaults(handler=cmd_forward)
    p = sub.add_parser("reconstruct", parents=[common],
                       help="reconstruct a potential from a measurement file")
    p.add_argument("measurements", help="measurement file written by simulate")
    p.set_defaults(handler=cmd_reconstruct)
    p = sub.add_parser("validate-mie", parents=[common],
                       help="compare CG and NAGD against the analytic bead solution")
    p.set_defaults(handler=cmd_validate_mie)
    p = sub.add_parser("bench", parents=[common], help="time the main kernels")
    p.set_defaults(handler=cmd_bench)
    p = sub.add_parser("predict-memory",
                       help="extra bytes an iterate-storing gradient would need")
    p.add_argument("n_pixels", type=int)
    p.add_argument("k_iters", type=int)
    p.add_argument("n_threads", type=int)
    p.set_defaults(handler=cmd_predict_memory)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None:
        os.environ["ODT_THREADS"] = str(args.threads)
    try:
        return args.handler(args)
    except odtio.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except odtio.DataInconsistencyError as exc:
        print(f"data inconsistency: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, ArithmeticError, ReconError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
