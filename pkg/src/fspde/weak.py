"""Weak-form residuals and the backward-evolved dual test function.

Two residual functionals test a computed trajectory against the variational
formulations: ``weak_residual_first`` pairs the path with a fixed smooth bump,
moving the fractional operator onto the test function through its skew-dual
(the multiplier with delta negated); ``weak_residual_second`` admits test
functions that also move in time.  Feeding the second residual the dual
function psi^t(s, .) = (kernel with skewness -delta at time t - s) * phi makes
the time-derivative and fractional pairings cancel mode by mode, which is the
discrete shadow of the equivalence argument between the variational and the
convolution forms of the solution.

All time sums are left-endpoint, matching the solvers' non-anticipating
convention, so the residual of a solver path vanishes with the scheme order
rather than saturating at a mixed-order floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CoefficientSpec, FracParams, GridSpec
from .noise import SheetIncrements
from .spectral import forward, inner, symbol, synthesis

__all__ = [
    "TestFunction",
    "TimeTestFunction",
    "make_bump",
    "make_battery",
    "constant_in_time",
    "dual_test_function",
    "weak_residual_first",
    "weak_residual_second",
]


@dataclass(frozen=True)
class TestFunction:
    """Smooth bump compactly supported inside (-L, L), with spectral derivatives."""

    values: np.ndarray                 # phi on the grid
    derivatives: tuple[np.ndarray, ...]   # d^k phi, k = 0..m (entry 0 is phi)
    frac_dual: np.ndarray              # fractional derivative with skewness -delta
    center: float
    width: float


@dataclass(frozen=True)
class TimeTestFunction:
    """Test function with one field per time level s = t_0..t_target."""

    values: np.ndarray       # (n_t + 1, N)
    ds: np.ndarray           # time derivative fields
    frac_dual: np.ndarray    # skew-dual fractional derivative per level
    t: float


def make_bump(center: float, width: float, grid: GridSpec, params: FracParams) -> TestFunction:
    """Standard mollifier bump exp(-1 / (1 - r^2)) on |r| < 1, r = (x-center)/width.

    The support [center - width, center + width] must sit strictly inside
    (-L, L); spatial derivatives (up to order m) and the skew-dual fractional
    derivative are spectral.
    """
    if width <= 0:
        raise ValueError("bump width must be positive")
    if center - width <= -grid.L or center + width >= grid.L:
        raise ValueError(
            f"bump support [{center - width}, {center + width}] not inside (-{grid.L}, {grid.L})")
    r = (grid.x - center) / width
    values = np.zeros(grid.N)
    inside = np.abs(r) < 1.0
    values[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))

    lam = grid.frequencies()
    phi_hat = forward(values, grid)
    derivs = tuple(synthesis((-1j * lam) ** k * phi_hat, grid).real
                   for k in range(params.m + 1))
    dual = synthesis(symbol(lam, params.alpha, -params.delta) * phi_hat, grid).real
    return TestFunction(values=values, derivatives=derivs, frac_dual=dual,
                        center=center, width=width)


def make_battery(grid: GridSpec, params: FracParams) -> tuple[TestFunction, ...]:
    """The documented five-bump battery: centers 0, +-L/4, widths L/8 and L/4."""
    L = grid.L
    combos = [(0.0, L / 4), (0.0, L / 8), (-L / 4, L / 8), (L / 4, L / 8), (-L / 4, L / 4)]
    return tuple(make_bump(c, w, grid, params) for c, w in combos)


def _level_index(t: float, grid: GridSpec) -> int:
    n = t / grid.dt
    if abs(n - round(n)) > 1e-9 or not 0 <= round(n) <= grid.M:
        raise ValueError(f"t={t} is not a grid time")
    return int(round(n))


def constant_in_time(phi: TestFunction, t: float, grid: GridSpec) -> TimeTestFunction:
    """Wrap a fixed bump as a (trivially) time-dependent test function."""
    n_t = _level_index(t, grid)
    values = np.tile(phi.values, (n_t + 1, 1))
    return TimeTestFunction(values=values, ds=np.zeros_like(values),
                            frac_dual=np.tile(phi.frac_dual, (n_t + 1, 1)), t=t)


def dual_test_function(phi: TestFunction, t: float, params: FracParams,
                       grid: GridSpec) -> TimeTestFunction:
    """Backward-evolved test function psi^t(s, .) ending at phi.

    In frequency space psi^t(s) = exp(psi_{-delta}(lam) (t - s)) phi_hat; its
    time derivative is minus its own skew-dual fractional derivative, and the
    stored ``ds`` field is built from exactly that identity.
    """
    n_t = _level_index(t, grid)
    lam = grid.frequencies()
    psi_dual = symbol(lam, params.alpha, -params.delta)
    phi_hat = forward(phi.values, grid)

    gaps = t - grid.times[: n_t + 1]
    spectral = np.exp(np.outer(gaps, psi_dual)) * phi_hat
    values = synthesis(spectral, grid).real
    values[n_t] = phi.values
    frac_dual = synthesis(psi_dual * spectral, grid).real
    return TimeTestFunction(values=values, ds=-frac_dual, frac_dual=frac_dual, t=t)


def _coefficient_rows(states: np.ndarray, fn, times: np.ndarray, x: np.ndarray,
                      n_t: int, N: int) -> np.ndarray:
    return np.stack([np.broadcast_to(np.asarray(fn(times[n], x, states[n]), dtype=float), (N,))
                     for n in range(n_t)])


def weak_residual_first(states: np.ndarray, sheet: SheetIncrements, phi: TestFunction,
                        t: float, coeffs: CoefficientSpec, params: FracParams,
                        grid: GridSpec) -> float:
    """Residual of the time-independent weak identity at time t.

    |<u(t), phi> - <u0, phi> - sum_n dt <u(t_n), dual phi>
      - sum_k (-1)^k sum_n dt <h_k(t_n,.,u), phi^(k)>
      - sum_{n,i} f(t_n, y_i, u) phi(y_i) dW[n][i]|
    """
    states = np.asarray(states)
    if states.shape != (grid.M + 1, grid.N):
        raise ValueError("trajectory does not match the grid")
    if sheet.grid != grid:
        raise ValueError("sheet does not match the grid")
    n_t = _level_index(t, grid)
    x, times = grid.x, grid.times

    total = inner(states[0], phi.values, grid)
    total += grid.dt * sum(inner(states[n], phi.frac_dual, grid) for n in range(n_t))
    for k, hk in enumerate(coeffs.h):
        rows = _coefficient_rows(states, hk, times, x, n_t, grid.N)
        total += (-1.0) ** k * grid.dt * float(
            grid.dx * np.sum(rows * phi.derivatives[k][None, :]))
    f_rows = _coefficient_rows(states, coeffs.f, times, x, n_t, grid.N)
    total += float(np.sum(f_rows * sheet.dW[:n_t] * phi.values[None, :]))

    return abs(inner(states[n_t], phi.values, grid) - total)


def weak_residual_second(states: np.ndarray, sheet: SheetIncrements, psi: TimeTestFunction,
                         t: float, coeffs: CoefficientSpec, params: FracParams,
                         grid: GridSpec) -> float:
    """Residual of the time-dependent weak identity at time t.

    Adds the sum_n dt <u(t_n), ds psi(t_n)> pairing and uses the moving test
    function in every term of the first-kind residual.
    """
    states = np.asarray(states)
    if states.shape != (grid.M + 1, grid.N):
        raise ValueError("trajectory does not match the grid")
    if sheet.grid != grid:
        raise ValueError("sheet does not match the grid")
    n_t = _level_index(t, grid)
    if psi.values.shape[0] != n_t + 1:
        raise ValueError("time test function does not cover the requested horizon")
    x, times = grid.x, grid.times
    lam = grid.frequencies()

    total = inner(states[0], psi.values[0], grid)
    total += grid.dt * float(grid.dx * np.sum(states[:n_t] * psi.ds[:n_t]))
    total += grid.dt * float(grid.dx * np.sum(states[:n_t] * psi.frac_dual[:n_t]))
    for k, hk in enumerate(coeffs.h):
        rows = _coefficient_rows(states, hk, times, x, n_t, grid.N)
        if k == 0:
            psi_k = psi.values[:n_t]
        else:
            psi_k = synthesis((-1j * lam) ** k * forward(psi.values[:n_t], grid), grid).real
        total += (-1.0) ** k * grid.dt * float(grid.dx * np.sum(rows * psi_k))
    f_rows = _coefficient_rows(states, coeffs.f, times, x, n_t, grid.N)
    total += float(np.sum(f_rows * sheet.dW[:n_t] * psi.values[:n_t]))

    return abs(inner(states[n_t], psi.values[n_t], grid) - total)
