import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def naive_forward(values, grid):
    """O(N^2) direct evaluation of the forward transform, used as an oracle."""
    lam = grid.frequencies()
    x = grid.x
    return grid.dx * np.array([np.sum(np.exp(1j * l * x) * values) for l in lam])


def log2_orders(errors):
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])
