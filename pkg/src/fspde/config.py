"""Problem description and validation.

Holds the operator data (order ``alpha``, skewness ``delta``, entire-derivative
count ``m``, drift coefficients), the truncated periodic grid, and the reaction /
diffusion coefficient callables.  ``validate`` checks every standing admissibility
constraint and returns violations as data rather than raising.

The continuous problem lives on the whole real line; we compute on the torus
``[-L, L)`` with ``N`` equispaced nodes so that the fractional symbol is exact on
the discrete frequency set.  ``N`` even guarantees a node exactly at ``x = 0``,
which the two-sheet noise construction relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


@lru_cache(maxsize=128)
def _frequencies_cached(n: int, length: float) -> np.ndarray:
    j = np.fft.fftfreq(n, d=1.0 / n)
    lam = np.pi * j / length
    lam.setflags(write=False)
    return lam

__all__ = [
    "FracParams",
    "GridSpec",
    "CoefficientSpec",
    "ValidationReport",
    "RunConfig",
    "even_part",
    "delta_bound",
    "validate",
    "make_coefficient",
    "build_coefficients",
    "load_config",
    "save_config",
    "parse_config_text",
]

# Default solver knobs, also used by the config loader.
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50


def even_part(alpha: float) -> int:
    """Largest even integer strictly less than ``alpha``.

    ``even_part(2.5) == 2``, ``even_part(1.5) == 0`` and, because the comparison
    is strict, ``even_part(2.0) == 0``.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    e = 2 * math.floor(alpha / 2.0)
    if e >= alpha:
        e -= 2
    return max(e, 0)


def delta_bound(alpha: float) -> float:
    """Admissible skewness radius min{alpha - [alpha]_2, 2 + [alpha]_2 - alpha}."""
    e = even_part(alpha)
    return min(alpha - e, 2.0 + e - alpha)


def _is_odd_integer(alpha: float) -> bool:
    return abs(alpha - round(alpha)) < 1e-12 and round(alpha) % 2 == 1


@dataclass(frozen=True)
class FracParams:
    """Data of the skewed fractional derivative of order ``alpha``.

    ``drift`` lists the constant coefficients c_0..c_m of the entire-derivative
    terms of the linear model; leave it empty for the general (nonlinear) model.
    """

    alpha: float
    delta: float = 0.0
    m: int = 0
    drift: tuple[float, ...] = ()

    def admissible_delta(self) -> bool:
        if _is_odd_integer(self.alpha):
            return self.delta == 0.0
        return abs(self.delta) <= delta_bound(self.alpha) + 1e-15


@dataclass(frozen=True)
class GridSpec:
    """Truncated periodic space-time grid.

    Space: ``N`` nodes x_i = -L + i*dx on [-L, L), dx = 2L/N, with a node at 0.
    Time: ``M`` uniform steps on [0, T], dt = T/M.
    """

    L: float
    N: int
    T: float
    M: int

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.M + 1)

    def frequencies(self) -> np.ndarray:
        """Angular frequencies lambda_j = pi*j/L in FFT order (0..N/2-1, -N/2..-1)."""
        return _frequencies_cached(self.N, self.L)

    def mode_index(self, j: int) -> int:
        """Array index of signed integer frequency j in FFT order."""
        if not -self.N // 2 <= j < self.N // 2:
            raise ValueError(f"mode {j} outside [-N/2, N/2) for N={self.N}")
        return j % self.N


# Callables of signature (t, x, u) -> array, vectorised over the node array x.
Coefficient = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientSpec:
    """Diffusion coefficient ``f`` and reaction terms ``h[k]``, k = 0..m.

    ``lipschitz`` is the declared Lipschitz constant of all coefficients in the
    state variable; it is metadata, checked only by a sampled finite-difference
    spot check.  ``envelopes`` optionally lists the growth envelopes a_k(x).
    """

    f: Coefficient
    h: tuple[Coefficient, ...] = ()
    lipschitz: float = 0.0
    envelopes: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[tuple[str, str], ...] = ()

    @staticmethod
    def from_violations(violations: Sequence[tuple[str, str]]) -> "ValidationReport":
        v = tuple(violations)
        return ValidationReport(ok=not v, violations=v)


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def validate(
    params: FracParams,
    grid: GridSpec | None = None,
    coeffs: CoefficientSpec | None = None,
    kernel_oracle: bool = False,
) -> ValidationReport:
    """Check every standing admissibility constraint.

    Violations are returned as ``(rule-id, message)`` pairs; the function never
    raises.  ``kernel_oracle=True`` relaxes the order constraint to alpha >= 1 so
    the closed-form alpha in {1, 2} kernels can be evaluated; the solvers demand
    alpha > 1.
    """
    bad: list[tuple[str, str]] = []

    if params.alpha <= 0:
        bad.append(("alpha.positive", f"alpha must be positive, got {params.alpha}"))
    elif kernel_oracle:
        if params.alpha < 1.0:
            bad.append(("alpha.oracle", f"kernel-oracle mode requires alpha >= 1, got {params.alpha}"))
    elif params.alpha <= 1.0:
        bad.append(("alpha.solver", f"solver use requires alpha > 1, got {params.alpha}"))

    if params.alpha > 0:
        if _is_odd_integer(params.alpha):
            if params.delta != 0.0:
                bad.append(("delta.odd", f"delta must be 0 at odd integer alpha={params.alpha}"))
        else:
            b = delta_bound(params.alpha)
            if abs(params.delta) > b + 1e-15:
                bad.append(("delta.bound", f"delta={params.delta} exceeds bound {b:.6g}"))

    if params.m < 0:
        bad.append(("m.nonneg", f"m must be >= 0, got {params.m}"))
    elif params.m >= 1 and params.alpha > 0 and params.m > math.floor(params.alpha):
        bad.append(("m.range", f"m={params.m} > floor(alpha)={math.floor(params.alpha)}"))
    if params.drift and len(params.drift) != params.m + 1:
        bad.append(("drift.length", f"drift has {len(params.drift)} entries, expected m+1={params.m + 1}"))

    if grid is not None:
        if grid.L <= 0:
            bad.append(("grid.L", f"L must be positive, got {grid.L}"))
        if not _is_power_of_two(grid.N):
            bad.append(("grid.N.pow2", f"N must be a power of two >= 2, got {grid.N}"))
        if grid.T <= 0:
            bad.append(("grid.T", f"T must be positive, got {grid.T}"))
        if grid.M < 1:
            bad.append(("grid.M", f"M must be >= 1, got {grid.M}"))

    if coeffs is not None:
        if len(coeffs.h) not in (0, params.m + 1):
            bad.append(("coeffs.h.length", f"h has {len(coeffs.h)} entries, expected m+1={params.m + 1}"))
        if coeffs.lipschitz < 0:
            bad.append(("coeffs.lipschitz", "declared Lipschitz constant must be >= 0"))
        elif grid is not None:
            bad.extend(_lipschitz_spot_check(coeffs, grid))

    return ValidationReport.from_violations(bad)


def _lipschitz_spot_check(coeffs: CoefficientSpec, grid: GridSpec) -> list[tuple[str, str]]:
    # Sampled finite differences in the state variable must not exceed the
    # declared constant by more than 5%.  Advisory, not a proof.
    bad: list[tuple[str, str]] = []
    x = grid.x[:: max(1, grid.N // 16)]
    probes = np.array([-2.0, -0.5, 0.0, 0.7, 1.9])
    du = 1e-6
    declared = 1.05 * coeffs.lipschitz + 1e-12
    for name, fn in [("f", coeffs.f)] + [(f"h{k}", hk) for k, hk in enumerate(coeffs.h)]:
        worst = 0.0
        for t in (0.0, grid.T / 2):
            for u0 in probes:
                base = np.asarray(fn(t, x, np.full_like(x, u0)), dtype=float)
                bumped = np.asarray(fn(t, x, np.full_like(x, u0 + du)), dtype=float)
                worst = max(worst, float(np.max(np.abs(bumped - base))) / du)
        if worst > declared:
            bad.append((f"lipschitz.{name}",
                        f"sampled slope {worst:.4g} exceeds 1.05 * declared {coeffs.lipschitz:.4g}"))
    return bad


# ---------------------------------------------------------------------------
# Built-in coefficient library
# ---------------------------------------------------------------------------

def make_coefficient(spec: str) -> tuple[Coefficient, float]:
    """Build a coefficient callable from a selector string.

    Selectors: ``const:c``, ``affine:a,b`` (a + b*u), ``sin`` (sin(u)),
    ``zero``, ``linear:c`` (c*u).  Returns the callable and its Lipschitz
    constant in the state variable.
    """
    name, _, argstr = spec.partition(":")
    args = [float(a) for a in argstr.split(",")] if argstr else []
    if name == "const":
        (c,) = args
        return (lambda t, x, u: np.full_like(np.asarray(u, dtype=float), c)), 0.0
    if name == "zero":
        return (lambda t, x, u: np.zeros_like(np.asarray(u, dtype=float))), 0.0
    if name == "affine":
        a, b = args
        return (lambda t, x, u: a + b * np.asarray(u, dtype=float)), abs(b)
    if name == "linear":
        (c,) = args
        return (lambda t, x, u: c * np.asarray(u, dtype=float)), abs(c)
    if name == "sin":
        return (lambda t, x, u: np.sin(np.asarray(u, dtype=float))), 1.0
    raise ValueError(f"unknown coefficient selector {spec!r}")


# ---------------------------------------------------------------------------
# Run configuration and the flat key=value config file
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("alpha", "delta", "m", "L", "N", "T", "M", "seed", "model")
_OPTIONAL_KEYS = ("f", "drift", "tol", "max_iter") + tuple(f"h{k}" for k in range(8))


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run: operator, grid, model and coefficients."""

    alpha: float
    delta: float
    m: int
    L: float
    N: int
    T: float
    M: int
    seed: int
    model: str                      # "linear" | "nonlinear"
    f: str = "const:1.0"
    h: tuple[str, ...] = ()         # selectors for h_0..h_m
    drift: tuple[float, ...] = ()   # c_0..c_m, linear model only
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def params(self) -> FracParams:
        return FracParams(self.alpha, self.delta, self.m, self.drift)

    def grid(self) -> GridSpec:
        return GridSpec(self.L, self.N, self.T, self.M)


def build_coefficients(config: RunConfig) -> CoefficientSpec:
    f, lip_f = make_coefficient(config.f)
    hs, lips = [], [lip_f]
    selectors = config.h if config.h else tuple(["zero"] * (config.m + 1))
    for spec in selectors:
        hk, lip = make_coefficient(spec)
        hs.append(hk)
        lips.append(lip)
    return CoefficientSpec(f=f, h=tuple(hs), lipschitz=max(lips))


def parse_config_text(text: str) -> RunConfig:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()

    unknown = sorted(set(entries) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(set(_REQUIRED_KEYS) - set(entries))
    if missing:
        raise ValueError(f"missing required config keys: {', '.join(missing)}")

    model = entries["model"]
    if model not in ("linear", "nonlinear"):
        raise ValueError(f"model must be linear or nonlinear, got {model!r}")
    m = int(entries["m"])
    h = tuple(entries.get(f"h{k}", "zero") for k in range(m + 1))
    drift = tuple(float(c) for c in entries["drift"].split(",")) if "drift" in entries else ()

    return RunConfig(
        alpha=float(entries["alpha"]),
        delta=float(entries["delta"]),
        m=m,
        L=float(entries["L"]),
        N=int(entries["N"]),
        T=float(entries["T"]),
        M=int(entries["M"]),
        seed=int(entries["seed"]),
        model=model,
        f=entries.get("f", "const:1.0"),
        h=h,
        drift=drift,
        tol=float(entries.get("tol", DEFAULT_TOL)),
        max_iter=int(entries.get("max_iter", DEFAULT_MAX_ITER)),
    )


def load_config(path) -> RunConfig:
    """Parse and validate a flat key=value config file.

    Raises ``ValueError`` on unknown or missing keys and on inadmissible
    parameters (with the violated rule ids in the message).
    """
    with open(path, "r", encoding="utf-8") as fh:
        config = parse_config_text(fh.read())
    report = validate(config.params(), config.grid(), build_coefficients(config))
    if not report.ok:
        rules = "; ".join(f"{rid}: {msg}" for rid, msg in report.violations)
        raise ValueError(f"invalid config {path}: {rules}")
    return config


def save_config(config: RunConfig, path) -> None:
    """Write a config back out; ``load_config`` reproduces it exactly."""
    lines = [
        f"alpha={config.alpha!r}",
        f"delta={config.delta!r}",
        f"m={config.m}",
        f"L={config.L!r}",
        f"N={config.N}",
        f"T={config.T!r}",
        f"M={config.M}",
        f"seed={config.seed}",
        f"model={config.model}",
        f"f={config.f}",
    ]
    for k, spec in enumerate(config.h):
        lines.append(f"h{k}={spec}")
    if config.drift:
        lines.append("drift=" + ",".join(repr(c) for c in config.drift))
    lines.append(f"tol={config.tol!r}")
    lines.append(f"max_iter={config.max_iter}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
