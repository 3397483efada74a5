"""Two-sheet space-time white noise on the grid.

The driving field W is built from independent cell increments
dW[n][i] ~ Normal(0, dt * dx), one per time level n and spatial cell
[x_i, x_i + dx).  Cells left and right of x = 0 are driven by disjoint
counter-based RNG substreams, realising the two independent sheets glued at
the origin; with a grid node at 0 no cell straddles the interface, so the
covariance (1/4)(sgn x + sgn y)^2 (t ^ s)(|x| ^ |y|) is matched exactly on
cells.

Reproducibility contract: increments are a pure function of
(seed, stream, grid).  Philox is counter based, so Monte Carlo paths (one
stream id each) can be generated in any order or in parallel and still be
bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .config import GridSpec
from .spectral import mode_sum

__all__ = [
    "SheetIncrements",
    "SpectralNoise",
    "sample_sheet",
    "zero_sheet",
    "scale_sheet",
    "cumulate",
    "to_spectral",
    "aggregate_sheet",
    "write_noise_dump",
    "read_noise_dump",
]


@dataclass(frozen=True)
class SheetIncrements:
    dW: np.ndarray          # (M, N), dW[n][i] over cell i during step n
    grid: GridSpec
    seed: int
    stream: int


@dataclass(frozen=True)
class SpectralNoise:
    dEta: np.ndarray        # (M, N) complex, dEta[n][j] = sum_i e^{i lam_j x_i} dW[n][i]
    grid: GridSpec
    seed: int
    stream: int


def _side_rng(seed: int, stream: int, side: int) -> np.random.Generator:
    # Raw 128-bit Philox key (seed word, stream/side word): counter-based, so
    # any path and either sheet side can be generated independently.
    if not 0 <= stream < 2 ** 62:
        raise ValueError(f"stream id out of range: {stream}")
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, 2 * stream + side], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_sheet(grid: GridSpec, seed: int, stream: int = 0) -> SheetIncrements:
    """Draw the full increment matrix for one noise path."""
    half = grid.N // 2
    std = np.sqrt(grid.dt * grid.dx)
    left = std * _side_rng(seed, stream, 0).standard_normal((grid.M, half))
    right = std * _side_rng(seed, stream, 1).standard_normal((grid.M, grid.N - half))
    dW = np.concatenate([left, right], axis=1)
    dW.setflags(write=False)
    return SheetIncrements(dW=dW, grid=grid, seed=seed, stream=stream)


def zero_sheet(grid: GridSpec, seed: int = 0, stream: int = 0) -> SheetIncrements:
    dW = np.zeros((grid.M, grid.N))
    dW.setflags(write=False)
    return SheetIncrements(dW=dW, grid=grid, seed=seed, stream=stream)


def scale_sheet(sheet: SheetIncrements, factor: float) -> SheetIncrements:
    dW = factor * sheet.dW
    dW.setflags(write=False)
    return SheetIncrements(dW=dW, grid=sheet.grid, seed=sheet.seed, stream=sheet.stream)


def cumulate(sheet: SheetIncrements, t: float, x: float) -> float:
    """Partial sum W(t, x): the noise mass of the rectangle [0,t] x [0 to x].

    (t, x) must lie on the grid; the rectangle is taken toward the origin for
    either sign of x, so W(t, 0) = W(0, x) = 0.
    """
    grid = sheet.grid
    n = t / grid.dt
    if abs(n - round(n)) > 1e-9 or not 0 <= round(n) <= grid.M:
        raise ValueError(f"t={t} is not a grid time")
    n = int(round(n))
    ix = (x + grid.L) / grid.dx
    if abs(ix - round(ix)) > 1e-9 or not 0 <= round(ix) < grid.N:
        raise ValueError(f"x={x} is not a grid node")
    ix = int(round(ix))
    half = grid.N // 2
    if ix >= half:
        block = sheet.dW[:n, half:ix]
    else:
        block = sheet.dW[:n, ix:half]
    return float(block.sum())


def to_spectral(sheet: SheetIncrements) -> SpectralNoise:
    """Per-mode martingale increments dEta[n][j] = sum_i e^{i lam_j x_i} dW[n][i].

    Deliberately without a dx factor: this is the Riemann sum of a stochastic
    integral, whose cell measure is already inside dW.  The increments have
    E |dEta[n][j]|^2 = 2 L dt and Hermitian symmetry in j.
    """
    dEta = mode_sum(sheet.dW, sheet.grid)
    dEta.setflags(write=False)
    return SpectralNoise(dEta=dEta, grid=sheet.grid, seed=sheet.seed, stream=sheet.stream)


def aggregate_sheet(sheet: SheetIncrements, space_factor: int, time_factor: int) -> SheetIncrements:
    """Coarsen a sheet by summing blocks of fine increments.

    Sums of independent Gaussians keep the white-noise law exactly, so the
    coarse sheet is a genuine noise path on the coarse grid that shares the
    fine path's realisation.  Both factors must divide the grid dimensions.
    """
    grid = sheet.grid
    if grid.M % time_factor or grid.N % space_factor:
        raise ValueError("aggregation factors must divide the grid dimensions")
    coarse = GridSpec(L=grid.L, N=grid.N // space_factor, T=grid.T, M=grid.M // time_factor)
    dW = sheet.dW.reshape(coarse.M, time_factor, coarse.N, space_factor).sum(axis=(1, 3))
    dW.setflags(write=False)
    return SheetIncrements(dW=dW, grid=coarse, seed=sheet.seed, stream=sheet.stream)


# ---------------------------------------------------------------------------
# Binary dump (header: grid + seed; body: row-major increments, f64 LE)
# ---------------------------------------------------------------------------

_MAGIC = b"FSPDENZ1"
_HEADER = struct.Struct("<8sdIdIqq")     # magic, L, N, T, M, seed, stream


def write_noise_dump(sheet: SheetIncrements, path) -> None:
    grid = sheet.grid
    header = _HEADER.pack(_MAGIC, grid.L, grid.N, grid.T, grid.M, sheet.seed, sheet.stream)
    body = np.ascontiguousarray(sheet.dW, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_noise_dump(path) -> SheetIncrements:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, L, N, T, M, seed, stream = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path} is not a noise dump")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != M * N:
        raise ValueError(f"noise dump body has {body.size} values, expected {M * N}")
    dW = body.reshape(M, N).copy()
    dW.setflags(write=False)
    return SheetIncrements(dW=dW, grid=GridSpec(L=L, N=int(N), T=T, M=int(M)),
                           seed=seed, stream=stream)
