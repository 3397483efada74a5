"""Monte Carlo moment estimation, refinement studies and CSV persistence.

Paths are driven by counter-based streams (one stream id per path), so runs
are deterministic for a fixed (config, n_paths, base_seed) regardless of
execution order; the reduction always happens in path-index order.  Setting
the environment variable ``FSPDE_THREADS`` above 1 maps paths over a thread
pool without changing any output.

Refinement studies couple resolutions pathwise: the finest sheet is drawn
once and coarser sheets are formed by summing blocks of its increments, which
preserves the white-noise law exactly and makes pairwise level differences a
discretisation-only signal.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import CoefficientSpec, GridSpec, RunConfig, build_coefficients
from .linear import InstabilityError, LinearModel, evolve_linear
from .mild import fixed_point_march, picard_solve
from .noise import aggregate_sheet, sample_sheet

__all__ = [
    "MomentReport",
    "ConvergenceReport",
    "default_initial_field",
    "solve_path",
    "run_mc",
    "convergence_study",
    "write_csv",
    "emit_moment_csv",
    "emit_convergence_csv",
]

MOMENT_ORDERS = (2, 4)


@dataclass(frozen=True)
class MomentReport:
    times: np.ndarray
    means: dict[int, np.ndarray]       # p -> per-time estimate of E |u(t)|_2^p
    std_errors: dict[int, np.ndarray]  # p -> sample std / sqrt(n_paths)
    sups: dict[int, float]             # p -> sup over the stored t-grid
    n_paths: int
    excluded: int


@dataclass(frozen=True)
class ConvergenceReport:
    levels: tuple[tuple[int, int], ...]   # (N, M) per level, coarse to fine
    diffs: tuple[float, ...]              # L2 difference between consecutive levels
    orders: tuple[float, ...]             # log2 ratios of consecutive diffs


def default_initial_field(grid: GridSpec) -> np.ndarray:
    """Smooth default initial condition used by the CLI and the harness."""
    return np.exp(-((grid.x / (grid.L / 4.0)) ** 2))


def _linear_f(coeffs: CoefficientSpec):
    zero = None

    def f(t, x):
        nonlocal zero
        if zero is None or zero.shape != x.shape:
            zero = np.zeros_like(x)
        return coeffs.f(t, x, zero)

    return f


def solve_path(config: RunConfig, sheet, u0: np.ndarray, engine: str = "march") -> np.ndarray:
    """Solve one path on the sheet's grid and return the (M+1, N) state array.

    ``engine="march"`` uses the direct fixed-point march for nonlinear models;
    ``engine="picard"`` runs the fixed-point iteration and raises
    ``InstabilityError`` on non-convergence so Monte Carlo can exclude the
    path.  Linear models always use the exact per-mode recursion.
    """
    grid = sheet.grid
    coeffs = build_coefficients(config)
    if config.model == "linear":
        model = LinearModel(params=config.params(), f=_linear_f(coeffs), u0=u0)
        return evolve_linear(model, grid, sheet).states
    if engine == "march":
        return fixed_point_march(u0, coeffs, config.params(), grid, sheet).u
    path, diag = picard_solve(u0, coeffs, config.params(), grid, sheet,
                              tol=config.tol, max_iter=config.max_iter)
    if not diag.converged:
        raise InstabilityError(
            f"fixed-point iteration did not converge in {config.max_iter} sweeps")
    return path.u


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FSPDE_THREADS", "1")))
    except ValueError:
        return 1


def run_mc(config: RunConfig, n_paths: int, base_seed: int | None = None,
           engine: str = "march") -> MomentReport:
    """Estimate E |u(t)|_2^p, p in {2, 4}, over independent noise paths.

    Paths use stream ids 0..n_paths-1 on ``base_seed`` (default: the config
    seed).  Unstable or non-convergent paths are excluded and counted; the
    estimates are deterministic for fixed inputs and independent of the
    degree of parallelism.
    """
    if n_paths < 100:
        raise ValueError("Monte Carlo needs at least 100 paths")
    seed = config.seed if base_seed is None else base_seed
    grid = config.grid()
    u0 = default_initial_field(grid)

    def one_path(stream: int) -> np.ndarray | None:
        sheet = sample_sheet(grid, seed, stream)
        try:
            states = solve_path(config, sheet, u0, engine=engine)
        except InstabilityError:
            return None
        return grid.dx * np.sum(states ** 2, axis=1)     # |u(t_n)|_2^2 per level

    workers = _thread_count()
    if workers == 1:
        results = map(one_path, range(n_paths))
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(one_path, range(n_paths))

    sums = {p: np.zeros(grid.M + 1) for p in MOMENT_ORDERS}
    sumsq = {p: np.zeros(grid.M + 1) for p in MOMENT_ORDERS}
    kept = 0
    excluded = 0
    for sq_norms in results:      # arrives in path-index order: fixed reduction
        if sq_norms is None:
            excluded += 1
            continue
        kept += 1
        for p in MOMENT_ORDERS:
            v = sq_norms ** (p // 2)
            sums[p] += v
            sumsq[p] += v * v
    if workers > 1:
        pool.shutdown()
    if kept == 0:
        raise InstabilityError("every Monte Carlo path was excluded")

    means = {p: sums[p] / kept for p in MOMENT_ORDERS}
    std_errors = {}
    for p in MOMENT_ORDERS:
        var = np.maximum(sumsq[p] / kept - means[p] ** 2, 0.0)
        if kept > 1:
            var *= kept / (kept - 1)
        std_errors[p] = np.sqrt(var / kept)
    sups = {p: float(means[p].max()) for p in MOMENT_ORDERS}
    return MomentReport(times=grid.times, means=means, std_errors=std_errors,
                        sups=sups, n_paths=kept, excluded=excluded)


def convergence_study(config: RunConfig, levels: int, stream: int = 0,
                      engine: str = "march") -> ConvergenceReport:
    """Pathwise self-convergence over ``levels`` nested (N, M)-doubling grids.

    The config grid is the coarsest level; one finest sheet drives every level
    through increment aggregation.  Differences are final-time L2 norms on the
    common (coarser) nodes; orders are log2 ratios and need >= 3 levels.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 nested levels")
    base = config.grid()
    fine_grid = GridSpec(L=base.L, N=base.N << (levels - 1), T=base.T,
                         M=base.M << (levels - 1))
    fine_sheet = sample_sheet(fine_grid, config.seed, stream)

    finals: list[np.ndarray] = []
    shapes: list[tuple[int, int]] = []
    for lev in range(levels):
        factor = 1 << (levels - 1 - lev)
        sheet = aggregate_sheet(fine_sheet, factor, factor) if factor > 1 else fine_sheet
        grid = sheet.grid
        u0 = default_initial_field(grid)
        states = solve_path(config, sheet, u0, engine=engine)
        finals.append(states[-1])
        shapes.append((grid.N, grid.M))

    diffs = []
    for lev in range(levels - 1):
        coarse = finals[lev]
        fine = finals[lev + 1][::2]          # coarse nodes are every 2nd fine node
        dx = 2.0 * base.L / shapes[lev][0]
        diffs.append(float(np.sqrt(dx * np.sum((coarse - fine) ** 2))))
    orders = tuple(float(np.log2(diffs[i] / diffs[i + 1])) for i in range(len(diffs) - 1))
    return ConvergenceReport(levels=tuple(shapes), diffs=tuple(diffs), orders=orders)


# ---------------------------------------------------------------------------
# CSV output ('.' decimal, header row, LF line endings, deterministic bytes)
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_moment_csv(report: MomentReport, path) -> None:
    header = ["t", "p2_mean", "p2_se", "p4_mean", "p4_se"]
    rows = ((report.times[n], report.means[2][n], report.std_errors[2][n],
             report.means[4][n], report.std_errors[4][n])
            for n in range(len(report.times)))
    write_csv(path, header, rows)


def emit_convergence_csv(report: ConvergenceReport, path) -> None:
    header = ["level", "N", "M", "diff_to_next", "observed_order"]
    rows = []
    for lev, (n_, m_) in enumerate(report.levels):
        diff = report.diffs[lev] if lev < len(report.diffs) else ""
        order = report.orders[lev] if lev < len(report.orders) else ""
        rows.append((lev, n_, m_, diff, order))
    write_csv(path, header, rows)
