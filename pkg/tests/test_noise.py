import numpy as np
import pytest

from fspde.config import GridSpec
from fspde.noise import (
    aggregate_sheet,
    cumulate,
    read_noise_dump,
    sample_sheet,
    to_spectral,
    write_noise_dump,
    zero_sheet,
)

GRID = GridSpec(L=1.0, N=8, T=2.0, M=8)


def stack_sheets(grid, seed, n_paths):
    return np.stack([sample_sheet(grid, seed, s).dW for s in range(n_paths)])


def test_increment_variance():
    draws = stack_sheets(GRID, 11, 300)            # 300 * 64 samples per cell slot
    var = draws.reshape(-1).var(ddof=1)
    n = draws.size
    se = GRID.dt * GRID.dx * np.sqrt(2.0 / (n - 1))
    assert abs(var - GRID.dt * GRID.dx) < 3 * se


def _w_samples(draws, t, x, grid):
    n = int(round(t / grid.dt))
    ix = int(round((x + grid.L) / grid.dx))
    half = grid.N // 2
    lo, hi = (half, ix) if ix >= half else (ix, half)
    return draws[:, :n, lo:hi].sum(axis=(1, 2))


@pytest.mark.parametrize("probe, expected", [
    ((1.0, 0.5, 2.0, 0.25), 1.0 * 0.25),     # same sign: (t ^ s)(|x| ^ |y|)
    ((1.0, 0.5, 1.0, -0.5), 0.0),            # opposite signs: independent sheets
    ((2.0, 0.75, 1.5, 0.75), 1.5 * 0.75),
    ((2.0, -0.5, 1.0, -0.25), 1.0 * 0.25),
])
def test_sheet_covariances(probe, expected):
    t, x, s, y = probe
    draws = stack_sheets(GRID, 5, 4000)
    a = _w_samples(draws, t, x, GRID)
    b = _w_samples(draws, s, y, GRID)
    cov = np.mean(a * b)
    se = np.std(a * b, ddof=1) / np.sqrt(len(a))
    assert abs(cov - expected) < 3 * max(se, 1e-12)


def test_cumulate_degenerate_rectangles():
    sheet = sample_sheet(GRID, 1, 0)
    for x in (-0.75, -0.25, 0.0, 0.5):
        assert cumulate(sheet, 0.0, x) == 0.0
    for t in (0.0, 0.5, 2.0):
        assert cumulate(sheet, t, 0.0) == 0.0


def test_cumulate_variance():
    vals = np.array([cumulate(sample_sheet(GRID, 2, s), 1.5, -0.75) for s in range(3000)])
    var = vals.var(ddof=1)
    target = 1.5 * 0.75
    se = target * np.sqrt(2.0 / (len(vals) - 1))
    assert abs(var - target) < 3 * se


def test_cumulate_rejects_off_grid_points():
    sheet = sample_sheet(GRID, 1, 0)
    with pytest.raises(ValueError, match="grid time"):
        cumulate(sheet, 0.3, 0.5)
    with pytest.raises(ValueError, match="grid node"):
        cumulate(sheet, 0.5, 0.3)


def test_spectral_increment_variance():
    grid = GridSpec(L=2.0, N=16, T=1.0, M=4)
    samples = np.stack([to_spectral(sample_sheet(grid, 101, s)).dEta for s in range(3000)])
    for j in (0, 1, 3, 7):
        vals = np.abs(samples[:, :, j]) ** 2
        est = vals.mean()
        se = vals.reshape(-1).std(ddof=1) / np.sqrt(vals.size)
        assert abs(est - 2 * grid.L * grid.dt) < 3 * se


def test_spectral_dc_mode_is_plain_sum():
    sheet = sample_sheet(GRID, 9, 4)
    spec = to_spectral(sheet)
    assert np.allclose(spec.dEta[:, 0].imag, 0.0)
    assert np.allclose(spec.dEta[:, 0].real, sheet.dW.sum(axis=1))


def test_spectral_hermitian_symmetry():
    spec = to_spectral(sample_sheet(GRID, 9, 4))
    for j in range(1, GRID.N // 2):
        assert np.allclose(spec.dEta[:, -j], np.conj(spec.dEta[:, j]))


def test_martingale_increments_uncorrelated():
    grid = GridSpec(L=2.0, N=16, T=1.0, M=8)
    samples = np.stack([to_spectral(sample_sheet(grid, 13, s)).dEta for s in range(4000)])
    for j in (1, 3):
        a = samples[:, 2, j]
        b = samples[:, 5, j]
        prod = (a * np.conj(b)).real
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        assert abs(prod.mean()) < 3 * se


def test_reproducibility_bit_identical():
    a = sample_sheet(GRID, 123456789, 7)
    b = sample_sheet(GRID, 123456789, 7)
    assert np.array_equal(a.dW, b.dW)
    assert np.array_equal(to_spectral(a).dEta, to_spectral(b).dEta)


def test_distinct_streams_uncorrelated():
    a = np.stack([sample_sheet(GRID, 4, 2 * s).dW.reshape(-1) for s in range(800)])
    b = np.stack([sample_sheet(GRID, 4, 2 * s + 1).dW.reshape(-1) for s in range(800)])
    prod = (a * b).mean(axis=1)
    se = prod.std(ddof=1) / np.sqrt(len(prod))
    assert abs(prod.mean()) < 3 * max(se, 1e-12)


def test_discrete_stochastic_fubini_is_exact():
    rng = np.random.default_rng(0)
    sheet = sample_sheet(GRID, 21, 0)
    xs = rng.standard_normal(5)                       # outer measure points
    mu = rng.standard_normal(5)                       # outer weights
    g = rng.standard_normal((5, GRID.N))              # kernel g(x, y_i)
    inner_first = sum(
        mu[a] * np.sum(g[a][None, :] * sheet.dW) for a in range(5))
    outer_first = np.sum((mu @ g)[None, :] * sheet.dW)
    assert abs(inner_first - outer_first) <= 1e-12 * max(1.0, abs(outer_first))


def test_aggregation_exact_block_sums():
    grid = GridSpec(L=2.0, N=16, T=1.0, M=8)
    sheet = sample_sheet(grid, 31, 0)
    coarse = aggregate_sheet(sheet, 2, 4)
    assert coarse.grid == GridSpec(L=2.0, N=8, T=1.0, M=2)
    manual = sheet.dW.reshape(2, 4, 8, 2).sum(axis=(1, 3))
    assert np.array_equal(coarse.dW, manual)


def test_aggregation_preserves_law():
    grid = GridSpec(L=2.0, N=16, T=1.0, M=8)
    draws = np.stack([aggregate_sheet(sample_sheet(grid, 37, s), 2, 2).dW for s in range(2000)])
    coarse = aggregate_sheet(sample_sheet(grid, 37, 0), 2, 2).grid
    var = draws.reshape(-1).var(ddof=1)
    target = coarse.dt * coarse.dx
    se = target * np.sqrt(2.0 / (draws.size - 1))
    assert abs(var - target) < 3 * se


def test_aggregation_factor_must_divide():
    with pytest.raises(ValueError, match="divide"):
        aggregate_sheet(sample_sheet(GRID, 1, 0), 3, 1)


def test_zero_sheet():
    sheet = zero_sheet(GRID)
    assert not sheet.dW.any()


def test_noise_dump_roundtrip_bit_exact(tmp_path):
    sheet = sample_sheet(GRID, 77, 5)
    path = tmp_path / "path.noise"
    write_noise_dump(sheet, path)
    loaded = read_noise_dump(path)
    assert loaded.grid == sheet.grid
    assert (loaded.seed, loaded.stream) == (77, 5)
    assert loaded.dW.tobytes() == sheet.dW.tobytes()
    write_noise_dump(loaded, tmp_path / "again.noise")
    assert (tmp_path / "again.noise").read_bytes() == path.read_bytes()


def test_noise_dump_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a noise dump at all, sorry" * 4)
    with pytest.raises(ValueError, match="not a noise dump"):
        read_noise_dump(path)
