"""Command line interface: fspde kernel|simulate-linear|simulate-mild|verify|mc|converge."""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness, kernel as kern, weak
from .config import RunConfig, build_coefficients, load_config
from .harness import default_initial_field, solve_path, write_csv
from .linear import LinearModel, evolve_linear
from .mild import etd_march, picard_solve
from .noise import aggregate_sheet, read_noise_dump, sample_sheet, write_noise_dump
from .spectral import l2_norm


def _load(args) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _outpath(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _snapshot_levels(grid, count: int) -> list[int]:
    return sorted(set(np.linspace(0, grid.M, count).round().astype(int).tolist()))


def _emit_fields(path, grid, states, levels) -> None:
    header = ["x"] + [f"u_t{grid.times[n]!r}" for n in levels]
    rows = ((grid.x[i], *(states[n][i] for n in levels)) for i in range(grid.N))
    write_csv(path, header, rows)


def cmd_kernel(args) -> int:
    config = _load(args)
    params, grid = config.params(), config.grid()
    sample = kern.kernel(args.t, args.k, params, grid)
    x = grid.x
    oracle = np.full(grid.N, np.nan)
    if params.alpha == 2.0 and params.delta == 0.0 and args.k == 0:
        oracle = kern.gaussian_kernel(args.t, x)
    elif params.alpha == 1.0 and params.delta == 0.0 and args.k == 0:
        oracle = kern.cauchy_kernel_periodic(args.t, x, grid.L)
    scale = args.t ** (-1.0 / params.alpha)
    tail = np.array([
        args.t ** (-(args.k + 1) / params.alpha)
        * kern.tail_series(scale * xi, args.k, args.terms, params)
        if xi != 0.0 else np.nan
        for xi in x])
    rows = []
    for i in range(grid.N):
        rows.append((x[i], sample.values[i],
                     "" if math.isnan(oracle[i]) else oracle[i],
                     "" if math.isnan(tail[i]) else tail[i]))
    write_csv(_outpath(args, "kernel.csv"), ["x", "G", "analytic_oracle", "tail_series"], rows)
    print(f"kernel written, mass defect {abs(kern.kernel_mass(sample, grid) - 1.0):.3e}")
    return 0


def _get_sheet(config, grid, args):
    if getattr(args, "noise_in", None):
        sheet = read_noise_dump(args.noise_in)
        if sheet.grid != grid:
            raise SystemExit("noise dump grid does not match the config grid")
        return sheet
    sheet = sample_sheet(grid, config.seed, stream=0)
    if getattr(args, "noise_out", None):
        write_noise_dump(sheet, args.noise_out)
    return sheet


def cmd_simulate_linear(args) -> int:
    config = _load(args)
    if config.model != "linear":
        raise SystemExit("simulate-linear needs model=linear")
    params, grid = config.params(), config.grid()
    coeffs = build_coefficients(config)
    sheet = _get_sheet(config, grid, args)
    zeros = np.zeros(grid.N)
    model = LinearModel(params=params, f=lambda t, x: coeffs.f(t, x, zeros), u0=default_initial_field(grid))
    traj = evolve_linear(model, grid, sheet)
    _emit_fields(_outpath(args, "fields.csv"), grid, traj.states, _snapshot_levels(grid, args.snapshots))

    # per-mode second-moment report at the final time
    from .spectral import SymbolTable
    theta = SymbolTable(params, grid).total
    re2 = 2.0 * theta.real
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(np.abs(re2) < 1e-14, 2.0 * grid.L * grid.T,
                       2.0 * grid.L * (1.0 - np.exp(re2 * grid.T)) / np.maximum(-re2, 1e-300))
    lam = grid.frequencies()
    rows = ((j, lam[j], var[j], abs(traj.spectral_states[-1][j]) ** 2)
            for j in range(grid.N))
    write_csv(_outpath(args, "modes.csv"), ["mode", "lambda", "ou_variance", "realized_sq"], rows)
    return 0


def cmd_simulate_mild(args) -> int:
    config = _load(args)
    params, grid = config.params(), config.grid()
    coeffs = build_coefficients(config)
    sheet = _get_sheet(config, grid, args)
    u0 = default_initial_field(grid)
    tol = args.tol if args.tol is not None else config.tol
    max_iter = args.max_iter if args.max_iter is not None else config.max_iter
    path, diag = picard_solve(u0, coeffs, params, grid, sheet, tol=tol, max_iter=max_iter)
    if not diag.converged:
        print(f"warning: not converged after {diag.iterations} sweeps", file=sys.stderr)
    _emit_fields(_outpath(args, "fields.csv"), grid, path.u, _snapshot_levels(grid, args.snapshots))

    rows = [[i, d] for i, d in enumerate(diag.distances)]
    write_csv(_outpath(args, "diagnostics.csv"), ["sweep", "distance"], rows)
    if args.oracle == "etd":
        other = etd_march(u0, coeffs, params, grid, sheet)
        gap = max(l2_norm(path.u[n] - other.u[n], grid) for n in range(grid.M + 1))
        print(f"etd cross-check gap (sup over levels, L2): {gap!r}")
    return 0


def cmd_verify(args) -> int:
    config = _load(args)
    params = config.params()
    base = config.grid()
    coeffs = build_coefficients(config)
    fine = type(base)(L=base.L, N=base.N << (args.levels - 1), T=base.T,
                      M=base.M << (args.levels - 1))
    fine_sheet = sample_sheet(fine, config.seed, stream=0)
    rows = []
    for lev in range(args.levels):
        factor = 1 << (args.levels - 1 - lev)
        sheet = aggregate_sheet(fine_sheet, factor, factor) if factor > 1 else fine_sheet
        grid = sheet.grid
        states = solve_path(config, sheet, default_initial_field(grid))
        battery = weak.make_battery(grid, params)
        for pid, phi in enumerate(battery):
            r1 = weak.weak_residual_first(states, sheet, phi, grid.T, coeffs, params, grid)
            psi_t = weak.dual_test_function(phi, grid.T, params, grid)
            r2 = weak.weak_residual_second(states, sheet, psi_t, grid.T, coeffs, params, grid)
            rows.append((pid, grid.T, r1, r2, lev))
    write_csv(_outpath(args, "verify.csv"),
              ["phi_id", "t", "residual_first", "residual_second", "level"], rows)
    return 0


def cmd_mc(args) -> int:
    config = _load(args)
    report = harness.run_mc(config, args.paths, engine=args.engine)
    harness.emit_moment_csv(report, _outpath(args, "moments.csv"))
    for p in harness.MOMENT_ORDERS:
        print(f"sup_t E|u|_2^{p} = {report.sups[p]!r}  (paths={report.n_paths}, excluded={report.excluded})")
    return 0


def cmd_converge(args) -> int:
    config = _load(args)
    report = harness.convergence_study(config, args.levels)
    harness.emit_convergence_csv(report, _outpath(args, "convergence.csv"))
    print("observed orders:", ", ".join(f"{o:.3f}" for o in report.orders))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fspde",
                                     description="Stochastic fractional PDE laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".")

    p = sub.add_parser("kernel", help="sample the Green function and its oracles")
    common(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--terms", type=int, default=1)
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("simulate-linear", help="exact per-mode linear solve")
    common(p)
    p.add_argument("--snapshots", type=int, default=9)
    p.add_argument("--noise-out", default=None)
    p.add_argument("--noise-in", default=None)
    p.set_defaults(fn=cmd_simulate_linear)

    p = sub.add_parser("simulate-mild", help="fixed-point mild solve")
    common(p)
    p.add_argument("--snapshots", type=int, default=9)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--oracle", choices=["etd", "none"], default="none")
    p.add_argument("--noise-out", default=None)
    p.add_argument("--noise-in", default=None)
    p.set_defaults(fn=cmd_simulate_mild)

    p = sub.add_parser("verify", help="weak-form residuals over the bump battery")
    common(p)
    p.add_argument("--levels", type=int, default=1)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("mc", help="Monte Carlo moment estimates")
    common(p)
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--engine", choices=["march", "picard"], default="march")
    p.set_defaults(fn=cmd_mc)

    p = sub.add_parser("converge", help="pathwise self-convergence study")
    common(p)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(fn=cmd_converge)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
