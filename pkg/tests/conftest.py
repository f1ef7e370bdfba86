import numpy as np
import pytest

from sdkg.grid import GridSpec, SpectralField


@pytest.fixture
def grid():
    return GridSpec(64, 2.0 * np.pi * 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_field(grid, rng, decay=0.0):
    coeffs = rng.standard_normal(grid.n_modes) \
        + 1j * rng.standard_normal(grid.n_modes)
    if decay:
        coeffs = coeffs / grid.bracket**decay
    return SpectralField(grid, coeffs)


def random_real_field(grid, rng, decay=2.0):
    from sdkg.grid import forward_transform
    samples = rng.standard_normal(grid.n_modes)
    f = forward_transform(samples, grid)
    if decay:
        f = SpectralField(grid, f.coeffs / grid.bracket**decay)
        samples = f.to_physical().real
        f = forward_transform(samples, grid)
    return f
