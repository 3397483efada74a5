"""Discrete Fourier conventions and the spectral fractional derivative.

The transform pair is fixed once for the whole package:

    forward:  coeffs_j = dx * sum_i exp(+i lambda_j x_i) f(x_i)
    inverse:  f(x_i)   = (1 / 2L) * sum_j exp(-i lambda_j x_i) coeffs_j

with lambda_j = pi*j/L for j in {-N/2, .., N/2 - 1}, stored in FFT order.
These approximate the continuum pair F f(lam) = int exp(i x lam) f(x) dx and
its (1/2pi)-normalised inverse.  Because the nodes start at x = -L rather
than 0, the plain FFT picks up the alternating phase (-1)^j, applied here so
callers never see it.

The fractional derivative of order alpha with skewness delta is the Fourier
multiplier

    psi(lam) = -|lam|^alpha * exp(-i delta (pi/2) sgn lam),   sgn(0) = 0,

applied in frequency space.  Re psi <= 0 for admissible (alpha, delta), which
is what makes every solver in this package dissipative.  The unpaired Nyquist
mode j = -N/2 is treated with lambda = -pi N / (2 L) and forced real after the
inverse transform.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import FracParams, GridSpec, delta_bound

__all__ = [
    "symbol",
    "SymbolTable",
    "build_symbol_table",
    "mode_sum",
    "forward",
    "inverse",
    "synthesis",
    "imag_residual",
    "frac_derivative",
    "apply_multiplier",
    "adjoint_check",
    "inner",
    "l2_norm",
]


def symbol(lam, alpha: float, delta: float):
    """Fractional symbol psi(lam) = -|lam|^alpha exp(-i delta pi/2 sgn lam).

    Accepts scalars or arrays; psi(0) = 0 by the sgn(0) = 0 convention.
    """
    lam = np.asarray(lam, dtype=float)
    out = -np.abs(lam) ** alpha * np.exp(-1j * delta * (np.pi / 2.0) * np.sign(lam))
    return out if out.ndim else complex(out)


def _check_admissible(alpha: float, delta: float) -> None:
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    p = FracParams(alpha, delta)
    if not p.admissible_delta():
        raise ValueError(f"delta={delta} inadmissible for alpha={alpha} (bound {delta_bound(alpha):.6g})")


class SymbolTable:
    """Precomputed multipliers for one (params, grid) pair; immutable in use."""

    def __init__(self, params: FracParams, grid: GridSpec):
        _check_admissible(params.alpha, params.delta)
        self.params = params
        self.grid = grid
        lam = grid.frequencies()
        self.lam = lam
        self.psi = symbol(lam, params.alpha, params.delta)
        self.drift_sym = np.zeros(grid.N, dtype=complex)
        for k, ck in enumerate(params.drift):
            self.drift_sym += ck * (-1j * lam) ** k

    @property
    def total(self) -> np.ndarray:
        return self.psi + self.drift_sym


def build_symbol_table(params: FracParams, grid: GridSpec) -> SymbolTable:
    return SymbolTable(params, grid)


@lru_cache(maxsize=128)
def _phase_cached(n: int) -> np.ndarray:
    j = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    phase = np.where(j % 2 == 0, 1.0, -1.0)
    phase.setflags(write=False)
    return phase


def _phase(grid: GridSpec) -> np.ndarray:
    # (-1)^j accounts for the node offset x_0 = -L.
    return _phase_cached(grid.N)


def mode_sum(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Plain phase sum sum_i exp(+i lambda_j x_i) v_i, without the dx factor.

    This is the discretisation used for stochastic integrals, where the cell
    measure already lives in the integrator increments.
    """
    values = np.asarray(values)
    if values.shape[-1] != grid.N:
        raise ValueError(f"field length {values.shape[-1]} does not match grid N={grid.N}")
    return _phase(grid) * (grid.N * np.fft.ifft(values, axis=-1))


def forward(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Function-transform coefficients dx * sum_i exp(+i lambda_j x_i) v_i."""
    return grid.dx * mode_sum(values, grid)


def synthesis(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Complex inverse transform (1/2L) sum_j exp(-i lambda_j x_i) c_j."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[-1] != grid.N:
        raise ValueError(f"coefficient length {coeffs.shape[-1]} does not match grid N={grid.N}")
    return np.fft.fft(_phase(grid) * coeffs, axis=-1) / (2.0 * grid.L)


def inverse(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Real-valued inverse transform (real part of the synthesis)."""
    return synthesis(coeffs, grid).real


def imag_residual(coeffs: np.ndarray, grid: GridSpec) -> float:
    """Largest imaginary component the real inverse discards."""
    return float(np.max(np.abs(synthesis(coeffs, grid).imag)))


def apply_multiplier(values: np.ndarray, mult: np.ndarray, grid: GridSpec) -> np.ndarray:
    return inverse(mult * forward(values, grid), grid)


def frac_derivative(values: np.ndarray, alpha: float, delta: float, grid: GridSpec) -> np.ndarray:
    """Fractional derivative via the psi multiplier; returns a real field."""
    _check_admissible(alpha, delta)
    return apply_multiplier(values, symbol(grid.frequencies(), alpha, delta), grid)


def inner(f: np.ndarray, g: np.ndarray, grid: GridSpec) -> float:
    """Discrete L2 pairing dx * sum_i f_i g_i."""
    return float(grid.dx * np.sum(np.asarray(f) * np.asarray(g)))


def l2_norm(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(grid.dx * np.sum(np.abs(np.asarray(f)) ** 2)))


def adjoint_check(f: np.ndarray, g: np.ndarray, alpha: float, delta: float, grid: GridSpec) -> float:
    """|<D f, g> - <f, D' g>| where D' is the derivative with skewness -delta.

    Exact (to round-off) in the discrete spectral inner product; the value is
    the adjointness defect of the implementation, not of the scheme.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if np.iscomplexobj(f) or np.iscomplexobj(g):
        raise ValueError("adjoint_check requires real fields")
    lhs = inner(frac_derivative(f, alpha, delta, grid), g, grid)
    rhs = inner(f, frac_derivative(g, alpha, -delta, grid), grid)
    return abs(lhs - rhs)
