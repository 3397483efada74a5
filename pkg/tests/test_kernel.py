import math

import numpy as np
import pytest

from fspde.config import FracParams, GridSpec
from fspde.kernel import (
    KernelResolutionError,
    cauchy_kernel_periodic,
    check_positivity,
    check_scaling,
    check_semigroup,
    gamma_norm,
    gaussian_kernel,
    kernel,
    kernel_imag_residual,
    kernel_mass,
    measure_norm_slope,
    min_resolved_time,
    norm_exponent,
    tail_series,
)

GAUSS_GRID = GridSpec(L=20.0, N=1024, T=1.0, M=16)
SUITE_GRID = GridSpec(L=20.0, N=512, T=1.0, M=16)


def test_gaussian_closed_form():
    sample = kernel(1.0, 0, FracParams(alpha=2.0, delta=0.0), GAUSS_GRID)
    x = GAUSS_GRID.x
    oracle = gaussian_kernel(1.0, x)
    window = np.abs(x) <= 8.0
    rel = np.abs(sample.values[window] - oracle[window]) / oracle[window]
    assert rel.max() < 1e-8


def test_cauchy_closed_form_with_wraparound_budget():
    grid = GridSpec(L=40.0, N=1024, T=1.0, M=16)
    sample = kernel(1.0, 0, FracParams(alpha=1.0, delta=0.0), grid)
    x = grid.x
    periodic = cauchy_kernel_periodic(1.0, x, grid.L)
    assert np.max(np.abs(sample.values - periodic) / periodic) < 1e-10
    # wrap-around budget: the discrete kernel is the free kernel plus images
    free = (1.0 / np.pi) / (1.0 + x ** 2)
    k = np.arange(1, 2000)[:, None]
    images = ((1.0 / np.pi) / (1.0 + (x[None, :] - 2 * grid.L * k) ** 2)).sum(0)
    images += ((1.0 / np.pi) / (1.0 + (x[None, :] + 2 * grid.L * k) ** 2)).sum(0)
    assert np.max(np.abs(sample.values - free - images)) < 1e-7
    # near the centre the images are a documented few-1e-3 relative effect
    centre = np.abs(x) <= 2.0
    assert np.max(np.abs(sample.values[centre] - free[centre]) / free[centre]) < 3e-3


def test_unit_mass_for_generic_orders():
    for alpha, delta in [(1.3, 0.5), (1.5, 0.0), (1.8, -0.2), (2.5, 0.3)]:
        params = FracParams(alpha=alpha, delta=delta)
        for t in (0.5, 1.0, 2.0):
            sample = kernel(t, 0, params, SUITE_GRID)
            assert abs(kernel_mass(sample, SUITE_GRID) - 1.0) < 1e-10


def test_mass_uniform_over_time_window():
    params = FracParams(alpha=1.5, delta=0.25)
    grid = GridSpec(L=26.0, N=1024, T=1.0, M=16)   # L >= 10 * 4^(2/3)
    for t in np.linspace(0.1, 4.0, 9):
        assert abs(kernel_mass(kernel(t, 0, params, grid), grid) - 1.0) < 1e-10


def test_kernel_argument_errors():
    params = FracParams(alpha=1.5, delta=0.0)
    with pytest.raises(ValueError, match="positive"):
        kernel(0.0, 0, params, SUITE_GRID)
    with pytest.raises(ValueError, match=">= 0"):
        kernel(1.0, -1, params, SUITE_GRID)
    with pytest.raises(ValueError, match="inadmissible"):
        kernel(1.0, 0, FracParams(alpha=1.5, delta=0.8), SUITE_GRID)


def test_resolution_floor_refuses_tiny_times():
    params = FracParams(alpha=1.5, delta=0.0)
    tmin = min_resolved_time(params, SUITE_GRID)
    assert tmin > 0
    with pytest.raises(KernelResolutionError):
        kernel(tmin / 4, 0, params, SUITE_GRID)
    kernel(2 * tmin, 0, params, SUITE_GRID)


def test_kernel_reality():
    assert kernel_imag_residual(1.0, 0, FracParams(alpha=1.6, delta=0.35), SUITE_GRID) < 1e-12
    assert kernel_imag_residual(0.7, 1, FracParams(alpha=2.5, delta=-0.4), SUITE_GRID) < 1e-12


# ---------------------------------------------------------------------------
# tail expansion
# ---------------------------------------------------------------------------

TAIL_GRID = GridSpec(L=300.0, N=1024, T=1.0, M=16)


def test_tail_series_vanishes_at_alpha_two():
    # every term carries sin(j pi), zero up to floating-point sine round-off
    params = FracParams(alpha=2.0, delta=0.0)
    for x in (3.0, 10.0, -7.0):
        assert tail_series(x, 0, 5, params) == pytest.approx(0.0, abs=1e-12)


def test_tail_series_leading_term_value():
    params = FracParams(alpha=1.5, delta=0.0)
    expected = (1.0 / math.pi) * 20.0 ** -2.5 * math.gamma(2.5) * math.sin(0.75 * math.pi)
    assert tail_series(20.0, 0, 1, params) == pytest.approx(expected, rel=1e-12)
    assert expected > 0


def test_tail_series_matches_kernel_far_out():
    params = FracParams(alpha=1.5, delta=0.0)
    sample = kernel(1.0, 0, params, TAIL_GRID)
    x = TAIL_GRID.x
    for target in (35.0, 45.0, 60.0, -35.0, -45.0):
        i = int(np.argmin(np.abs(x - target)))
        series = tail_series(x[i], 0, 1, params)
        assert abs(series - sample.values[i]) / abs(sample.values[i]) < 0.02


def test_tail_series_derivative_sign_flip_against_kernel():
    # the l = 1 leading coefficient flips sign on the right tail relative to
    # l = 0; check against a finite difference of the sampled kernel
    params = FracParams(alpha=1.5, delta=0.0)
    sample = kernel(1.0, 0, params, TAIL_GRID)
    x = TAIL_GRID.x
    i = int(np.argmin(np.abs(x - 45.0)))
    fd = (sample.values[i + 1] - sample.values[i - 1]) / (2 * TAIL_GRID.dx)
    series = tail_series(x[i], 1, 1, params)
    assert np.sign(series) == np.sign(fd) == -1.0
    assert np.sign(tail_series(x[i], 0, 1, params)) == +1.0
    assert abs(series - fd) / abs(fd) < 0.05


def test_tail_series_errors():
    params = FracParams(alpha=1.5, delta=0.0)
    with pytest.raises(ValueError, match="x = 0"):
        tail_series(0.0, 0, 1, params)
    with pytest.raises(ValueError, match="at least one term"):
        tail_series(1.0, 0, 0, params)


# ---------------------------------------------------------------------------
# semigroup, scaling, positivity
# ---------------------------------------------------------------------------

def test_semigroup_identity():
    assert check_semigroup(0.5, 0.5, FracParams(alpha=1.5, delta=0.3), SUITE_GRID) < 1e-8


def test_semigroup_gaussian_case():
    grid = GridSpec(L=20.0, N=512, T=1.0, M=16)
    params = FracParams(alpha=2.0, delta=0.0)
    assert check_semigroup(0.6, 0.9, params, grid) < 1e-8
    # independent closed form: variance additivity of the heat kernel
    direct = kernel(1.5, 0, params, grid).values
    assert np.max(np.abs(direct - gaussian_kernel(1.5, grid.x))) < 1e-10


def test_kernel_continuity_in_time():
    params = FracParams(alpha=1.5, delta=0.2)
    base = kernel(0.8, 0, params, SUITE_GRID).values
    gaps = [np.max(np.abs(kernel(0.8 + eps, 0, params, SUITE_GRID).values - base))
            for eps in (0.1, 0.05, 0.025)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05 * np.max(np.abs(base))


def test_scaling_identity():
    assert check_scaling(2.0, 0, FracParams(alpha=1.6, delta=0.0), SUITE_GRID) < 1e-8
    assert check_scaling(2.0, 1, FracParams(alpha=1.7, delta=0.25), SUITE_GRID) < 1e-8
    assert check_scaling(1.0, 0, FracParams(alpha=1.6, delta=0.1), SUITE_GRID) == pytest.approx(0.0, abs=1e-14)


def test_scaling_matches_gaussian_derivative_closed_form():
    grid = GridSpec(L=24.0, N=512, T=1.0, M=16)
    params = FracParams(alpha=2.0, delta=0.0)
    t = 2.0
    sample = kernel(t, 1, params, grid)
    x = grid.x
    oracle = gaussian_kernel(t, x) * (-x / (2 * t))
    assert np.max(np.abs(sample.values - oracle)) < 1e-10
    assert check_scaling(t, 1, params, grid) < 1e-8


def test_positivity_verdicts():
    mn, is_density = check_positivity(1.0, FracParams(alpha=1.5, delta=0.4), SUITE_GRID)
    assert is_density and mn >= -1e-9
    mn, is_density = check_positivity(1.0, FracParams(alpha=2.5, delta=0.0), SUITE_GRID)
    assert not is_density and mn < -1e-6
    grid = GridSpec(L=8.0, N=512, T=1.0, M=16)
    mn, is_density = check_positivity(1.0, FracParams(alpha=2.0, delta=0.0), grid)
    assert is_density and mn > 0


def test_tail_decay_spot_check():
    params = FracParams(alpha=1.5, delta=0.0)
    for l in (0, 1, 2):
        sample = kernel(1.0, l, params, TAIL_GRID)
        x = TAIL_GRID.x
        radii = [60.0, 120.0, 200.0, 280.0]
        vals = [abs(sample.values[int(np.argmin(np.abs(x - r)))]) for r in radii]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-4


# ---------------------------------------------------------------------------
# gamma-norm exponents
# ---------------------------------------------------------------------------

NORM_GRID = GridSpec(L=30.0, N=1024, T=1.0, M=16)


def test_norm_exponent_values():
    assert norm_exponent(1.5, 1.0, 0) == pytest.approx(0.0)
    assert norm_exponent(1.5, 2.0, 0) == pytest.approx(-1.0 / 3.0)
    assert norm_exponent(1.8, 1.0, 1) == pytest.approx(-1.0 / 1.8)
    with pytest.raises(ValueError, match="gamma"):
        norm_exponent(1.5, 0.3, 0)


def test_measured_norm_slopes():
    ts = [0.5, 1.0, 2.0]
    for alpha, gamma, k in [(1.5, 2.0, 0), (1.8, 1.0, 1)]:
        params = FracParams(alpha=alpha, delta=0.0)
        slope = measure_norm_slope(gamma, k, params, NORM_GRID, ts)
        expected = norm_exponent(alpha, gamma, k)
        assert abs(slope - expected) <= 0.01 * abs(expected)


def test_unit_gamma_norm_is_mass():
    params = FracParams(alpha=1.5, delta=0.0)
    sample = kernel(1.0, 0, params, NORM_GRID)
    assert gamma_norm(sample, 1.0, NORM_GRID) == pytest.approx(1.0, abs=1e-10)


def test_norm_slope_requires_spread():
    with pytest.raises(ValueError, match="factor 4"):
        measure_norm_slope(2.0, 0, FracParams(alpha=1.5, delta=0.0), NORM_GRID, [0.9, 1.1])
