"""Mode-wise exact-exponential solver for the linear equation.

With constant drift coefficients and a diffusion coefficient independent of
the state, the Fourier transform of the solution solves, mode by mode, a
linear SDE driven by the martingale increments dEta_j: a generalised
Ornstein-Uhlenbeck process.  The solver applies the exact exponential factor
exp((psi_j + b_j) dt) per step, with b_j = sum_k c_k (-i lam_j)^k, and
accumulates the noise with the semigroup weight taken from the start of each
cell:

    u_hat_j(t_{n+1}) = exp((psi_j + b_j) dt) * (u_hat_j(t_n) + dXi_j(t_n)),
    dXi_j(t_n) = sum_i exp(i lam_j y_i) f(t_n, y_i) dW[n][i].

The coefficient f is evaluated at the left endpoint of each time cell, which
keeps the discrete stochastic integral non-anticipating.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .config import FracParams, GridSpec
from .noise import SheetIncrements
from .spectral import SymbolTable, forward, mode_sum, synthesis

__all__ = [
    "LinearModel",
    "Trajectory",
    "InstabilityError",
    "evolve_linear",
    "residual_integral_form",
]


class InstabilityError(RuntimeError):
    """Raised when some mode has positive growth rate or a state blows up."""


@dataclass(frozen=True)
class LinearModel:
    """Linear problem data: operator, drift, deterministic f(s, y), initial field.

    ``f`` must not depend on the state; a frozen random sample (drawn once,
    independently of the driving sheet) is fine.
    """

    params: FracParams
    f: Callable[[float, np.ndarray], np.ndarray]
    u0: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray                # (M+1,)
    spectral_states: np.ndarray      # (M+1, N) complex
    noise_ref: tuple[int, int]       # (seed, stream) of the driving sheet
    params: FracParams
    grid: GridSpec

    @cached_property
    def states(self) -> np.ndarray:
        """Real physical fields, the inverse transform of every spectral level."""
        out = synthesis(self.spectral_states, self.grid).real
        out.setflags(write=False)
        return out


def _step_factor(table: SymbolTable, dt: float) -> np.ndarray:
    theta = table.total
    growing = theta.real > 1e-12
    if np.any(growing):
        j = int(np.argmax(theta.real))
        raise InstabilityError(
            f"mode {j} has positive growth rate Re(psi + drift) = {theta.real[j]:.3g}")
    return np.exp(theta * dt)


def evolve_linear(model: LinearModel, grid: GridSpec, sheet: SheetIncrements) -> Trajectory:
    """March the per-mode recursion across all time levels."""
    if sheet.grid != grid:
        raise ValueError("sheet was drawn on a different grid")
    if len(model.u0) != grid.N:
        raise ValueError("initial field length does not match the grid")

    table = SymbolTable(model.params, grid)
    factor = _step_factor(table, grid.dt)
    x = grid.x
    times = grid.times

    rows = np.empty((grid.M, grid.N))
    for n in range(grid.M):
        rows[n] = np.broadcast_to(np.asarray(model.f(times[n], x), dtype=float), (grid.N,))
    d_xi = mode_sum(rows * sheet.dW, grid)

    spectral = np.empty((grid.M + 1, grid.N), dtype=complex)
    spectral[0] = forward(model.u0, grid)
    state = spectral[0]
    for n in range(grid.M):
        state = factor * (state + d_xi[n])
        spectral[n + 1] = state
    if not np.all(np.isfinite(spectral)):
        bad = ~np.isfinite(spectral).all(axis=1)
        raise InstabilityError(f"non-finite spectral state at time level {int(np.argmax(bad))}")

    spectral.setflags(write=False)
    return Trajectory(times=times, spectral_states=spectral,
                      noise_ref=(sheet.seed, sheet.stream), params=model.params, grid=grid)


def residual_integral_form(traj: Trajectory, sheet: SheetIncrements,
                           f: Callable[[float, np.ndarray], np.ndarray] | None = None) -> float:
    """Defect of the integrated per-mode identity along the trajectory.

    Checks u_hat(t_n) = u_hat(0) + (psi + b) * Q_n + eta(t_n) with Q_n the
    left-rectangle quadrature of the time integral of u_hat.  The rectangle
    rule makes the defect first order in dt for both the drift and the noise
    parts, so the residual halves when M doubles.
    """
    grid = traj.grid
    if sheet.grid != grid:
        raise ValueError("sheet does not match the trajectory grid")
    if (sheet.seed, sheet.stream) != traj.noise_ref:
        raise ValueError("sheet is not the noise path that produced this trajectory")

    table = SymbolTable(traj.params, grid)
    theta = table.total
    x = grid.x
    if f is None:
        rows = sheet.dW
    else:
        rows = np.stack([np.broadcast_to(np.asarray(f(traj.times[n], x), dtype=float), (grid.N,))
                         * sheet.dW[n] for n in range(grid.M)])
    d_eta = mode_sum(rows, grid)

    worst = 0.0
    q = np.zeros(grid.N, dtype=complex)
    eta = np.zeros(grid.N, dtype=complex)
    for n in range(1, grid.M + 1):
        q += grid.dt * traj.spectral_states[n - 1]
        eta += d_eta[n - 1]
        defect = traj.spectral_states[n] - traj.spectral_states[0] - theta * q - eta
        worst = max(worst, float(np.max(np.abs(defect))))
    return worst
