"""Numerical laboratory for one-dimensional stochastic fractional PDEs.

The equation u_t = D u + sum_k d^k/dx^k h_k(t, x, u) + f(t, x, u) W_dot, with
D the skewed fractional derivative of order alpha and W a two-sheet space-time
white noise, is discretised on a periodic torus where the fractional symbol is
exact.  The package evaluates the fractional Green function and its provable
properties, solves the linear model exactly per Fourier mode, constructs the
mild solution of the nonlinear model by fixed-point iteration on the whole
space-time path, and verifies the weak formulations by residual functionals.
"""

from .config import (
    CoefficientSpec,
    FracParams,
    GridSpec,
    RunConfig,
    ValidationReport,
    build_coefficients,
    delta_bound,
    even_part,
    load_config,
    make_coefficient,
    save_config,
    validate,
)
from .harness import ConvergenceReport, MomentReport, convergence_study, run_mc
from .kernel import (
    KernelResolutionError,
    KernelSample,
    check_positivity,
    check_scaling,
    check_semigroup,
    kernel,
    kernel_mass,
    measure_norm_slope,
    min_resolved_time,
    norm_exponent,
    tail_series,
)
from .linear import InstabilityError, LinearModel, Trajectory, evolve_linear, residual_integral_form
from .mild import (
    PathState,
    PicardDiagnostics,
    drift_term,
    etd_march,
    fixed_point_march,
    fixed_point_residual,
    noise_term,
    picard_solve,
    semigroup_apply,
)
from .noise import (
    SheetIncrements,
    SpectralNoise,
    aggregate_sheet,
    cumulate,
    read_noise_dump,
    sample_sheet,
    to_spectral,
    write_noise_dump,
)
from .spectral import (
    SymbolTable,
    adjoint_check,
    forward,
    frac_derivative,
    inverse,
    symbol,
)
from .weak import (
    TestFunction,
    TimeTestFunction,
    dual_test_function,
    make_battery,
    make_bump,
    weak_residual_first,
    weak_residual_second,
)

__version__ = "0.1.0"
