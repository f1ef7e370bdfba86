import numpy as np
import pytest

from sdkg.grid import (
    GridSpec,
    SpectralField,
    dealias,
    forward_transform,
    inverse_transform,
    l2_norm_physical,
    sobolev_norm,
)

from conftest import random_field


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(7, 1.0)
    with pytest.raises(ValueError):
        GridSpec(6, 1.0)
    with pytest.raises(ValueError):
        GridSpec(64, -1.0)


def test_frequencies_symmetric(grid):
    xs = np.sort(grid.frequencies)
    # symmetric about zero except the unmatched most-negative mode
    assert np.allclose(xs[1:], -xs[1:][::-1])
    assert xs[0] == -np.max(xs) - 2.0 * np.pi / grid.domain_length


def test_round_trip_many(grid, rng):
    worst = 0.0
    for _ in range(1000):
        samples = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        back = inverse_transform(forward_transform(samples, grid))
        worst = max(worst, np.max(np.abs(back - samples))
                    / max(np.max(np.abs(samples)), 1e-30))
    assert worst < 1e-12


def test_constant_transform(grid):
    f = forward_transform(np.ones(grid.n_modes), grid)
    assert abs(f.coeffs[0] - grid.domain_length) < 1e-12 * grid.domain_length
    assert np.max(np.abs(f.coeffs[1:])) < 1e-12 * grid.domain_length


def test_single_mode_orthogonality(grid):
    xi1 = grid.frequencies[3]
    f = forward_transform(np.exp(1j * xi1 * grid.x), grid)
    others = np.delete(f.coeffs, 3)
    assert abs(f.coeffs[3] - grid.domain_length) < 1e-11 * grid.domain_length
    assert np.max(np.abs(others)) < 1e-11 * grid.domain_length


def test_plancherel_direct_oracle(grid, rng):
    # both sides summed directly, independent of the norm helpers
    for _ in range(25):
        samples = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        f = forward_transform(samples, grid)
        physical = np.sum(np.abs(samples) ** 2) * grid.dx
        spectral = np.sum(np.abs(f.coeffs) ** 2) / grid.domain_length
        assert abs(physical - spectral) < 1e-12 * physical


def test_length_mismatch_rejected(grid):
    with pytest.raises(ValueError):
        forward_transform(np.ones(32), grid)
    with pytest.raises(ValueError):
        SpectralField(grid, np.ones(32, dtype=complex))


def test_sobolev_norm_values(grid):
    zero = SpectralField.zero(grid)
    assert sobolev_norm(zero, 1.3) == 0.0
    L = grid.domain_length
    xi1 = grid.frequencies[5]
    f = forward_transform(np.exp(1j * xi1 * grid.x), grid)
    assert abs(sobolev_norm(f, 0.0) - np.sqrt(L)) < 1e-10 * np.sqrt(L)
    # weighted-sum oracle for s = 1
    oracle = np.sqrt(np.sum((1 + grid.frequencies**2)
                            * np.abs(f.coeffs) ** 2) / L)
    assert abs(sobolev_norm(f, 1.0) - oracle) < 1e-12 * oracle
    assert abs(oracle - np.sqrt(1 + xi1**2) * np.sqrt(L)) < 1e-9


def test_sobolev_zero_is_l2(grid, rng):
    for _ in range(20):
        f = random_field(grid, rng)
        quad = l2_norm_physical(f.to_physical(), grid)
        assert abs(sobolev_norm(f, 0.0) - quad) < 1e-10 * quad


def test_sobolev_monotone_in_s(grid, rng):
    for _ in range(20):
        f = random_field(grid, rng)
        s1, s2 = sorted(rng.uniform(-2, 2, size=2))
        assert sobolev_norm(f, s1) <= sobolev_norm(f, s2) * (1 + 1e-12)


def test_dealias_zeroes_top_third(grid):
    f = SpectralField(grid, np.ones(grid.n_modes, dtype=complex))
    g = dealias(f)
    k = np.fft.fftfreq(grid.n_modes, d=1.0 / grid.n_modes)
    assert np.all(g.coeffs[np.abs(k) >= grid.n_modes / 3] == 0)
    assert np.all(g.coeffs[np.abs(k) < grid.n_modes / 3] == 1)
