import numpy as np
import pytest

from sdkg.grid import GridSpec, SpectralField, forward_transform, sobolev_norm
from sdkg.model import (
    MINUS_XI,
    PLUS_BRACKET_XI,
    PLUS_XI,
    DispersionSymbol,
    SplitState,
    conj_coeffs,
    duhamel,
    group_apply,
    split,
    unsplit,
)

from conftest import random_field, random_real_field


def test_symbol_values():
    xi = np.array([-3.0, 0.0, 2.0])
    assert np.allclose(PLUS_XI.evaluate(xi), xi)
    assert np.allclose(MINUS_XI.evaluate(xi), -xi)
    assert np.allclose(PLUS_BRACKET_XI.evaluate(xi), np.sqrt(1 + xi**2))
    assert np.allclose(DispersionSymbol("minus_bracket_xi").evaluate(xi),
                       -np.sqrt(1 + xi**2))
    with pytest.raises(ValueError):
        DispersionSymbol("xi_squared")


def test_conj_coeffs(grid, rng):
    f = random_field(grid, rng)
    direct = forward_transform(np.conj(f.to_physical()), grid)
    assert np.max(np.abs(conj_coeffs(f.coeffs) - direct.coeffs)) < 1e-10


def test_split_zero_velocity(grid, rng):
    phi = random_real_field(grid, rng)
    phi_dot = SpectralField.zero(grid)
    psi = (random_field(grid, rng), random_field(grid, rng))
    st = split(psi, phi, phi_dot, M=0.5)
    assert np.max(np.abs(st.phi_plus.coeffs - 0.5 * phi.coeffs)) < 1e-12


def test_split_unsplit_round_trip(grid, rng):
    phi = random_real_field(grid, rng)
    phi_dot = random_real_field(grid, rng)
    psi = (random_field(grid, rng), random_field(grid, rng))
    st = split(psi, phi, phi_dot, M=1.0)
    (pp, pm), phi2, phi_dot2 = unsplit(st)
    scale = max(np.max(np.abs(phi.coeffs)), np.max(np.abs(phi_dot.coeffs)))
    assert np.max(np.abs(phi2.coeffs - phi.coeffs)) < 1e-12 * scale
    assert np.max(np.abs(phi_dot2.coeffs - phi_dot.coeffs)) < 1e-12 * scale
    assert pp is st.psi_plus and pm is st.psi_minus
    # reconstructed scalar field is real
    recon = phi2.to_physical()
    assert np.max(np.abs(recon.imag)) < 1e-10 * max(np.max(np.abs(recon)), 1)


def test_split_conjugate_pair(grid, rng):
    # conj(phi_plus) equals (phi - i <D>^{-1} phi_dot) / 2
    phi = random_real_field(grid, rng)
    phi_dot = random_real_field(grid, rng)
    st = split((random_field(grid, rng), random_field(grid, rng)),
               phi, phi_dot, M=0.0)
    phi_minus = 0.5 * (phi.coeffs - 1j * phi_dot.coeffs / grid.bracket)
    assert np.max(np.abs(conj_coeffs(st.phi_plus.coeffs) - phi_minus)) < 1e-11


def test_unsplit_zero_and_single_mode(grid):
    zero = SpectralField.zero(grid)
    st = SplitState(zero, zero, zero)
    (_, _), phi, phi_dot = unsplit(st)
    assert np.all(phi.coeffs == 0) and np.all(phi_dot.coeffs == 0)

    # phi_plus = e^{i xi_1 x}: hand-evaluated velocity coefficients
    idx = 4
    xi1 = grid.frequencies[idx]
    phi_plus = forward_transform(np.exp(1j * xi1 * grid.x), grid)
    st = SplitState(zero, zero, phi_plus)
    (_, _), phi, phi_dot = unsplit(st)
    L = grid.domain_length
    br = np.sqrt(1 + xi1**2)
    expect_dot = np.zeros(grid.n_modes, dtype=complex)
    expect_dot[idx] = -1j * br * L
    expect_dot[-idx] = 1j * br * L
    assert np.max(np.abs(phi_dot.coeffs - expect_dot)) < 1e-9 * L


def test_kg_mass_fixed(grid):
    zero = SpectralField.zero(grid)
    with pytest.raises(ValueError):
        SplitState(zero, zero, zero, kg_mass=2.0)


def test_group_identity_and_phase(grid, rng):
    f = random_field(grid, rng)
    g0 = group_apply(PLUS_XI, 0.0, f)
    assert np.array_equal(g0.coeffs, f.coeffs)
    idx, t = 6, 0.7
    xi1 = grid.frequencies[idx]
    mode = forward_transform(np.exp(1j * xi1 * grid.x), grid)
    moved = group_apply(PLUS_XI, t, mode)
    assert abs(moved.coeffs[idx] - np.exp(-1j * t * xi1) * mode.coeffs[idx]) < 1e-9


def test_group_unitary_every_hs(grid, rng):
    for _ in range(100):
        f = random_field(grid, rng)
        s = rng.uniform(-2, 2)
        t = rng.uniform(-5, 5)
        sym = (PLUS_XI, MINUS_XI, PLUS_BRACKET_XI)[int(rng.integers(0, 3))]
        a = sobolev_norm(f, s)
        b = sobolev_norm(group_apply(sym, t, f), s)
        assert abs(a - b) < 1e-12 * max(a, 1e-30)


def test_group_property(grid, rng):
    f = random_field(grid, rng)
    for sym in (PLUS_XI, PLUS_BRACKET_XI):
        one = group_apply(sym, 0.9, group_apply(sym, 0.4, f))
        two = group_apply(sym, 1.3, f)
        assert np.max(np.abs(one.coeffs - two.coeffs)) < 1e-12 * np.max(
            np.abs(f.coeffs))


def test_duhamel_zero_forcing(grid):
    times = np.linspace(0, 1, 9)
    forcing = [SpectralField.zero(grid) for _ in times]
    out = duhamel(PLUS_BRACKET_XI, forcing, times, 1.0)
    assert np.all(out.coeffs == 0)


def test_duhamel_constant_forcing_convergence(grid):
    # exact antiderivative oracle: integral = c (1 - e^{-i t h}) / (i h)
    idx = 5
    h = PLUS_BRACKET_XI.on_grid(grid)[idx]
    c = 0.7 - 0.2j
    t = 1.0
    exact = c * (1.0 - np.exp(-1j * t * h)) / (1j * h)
    errs = []
    for m in (8, 16, 32):
        times = np.linspace(0, t, m + 1)
        coeffs = np.zeros(grid.n_modes, dtype=complex)
        coeffs[idx] = c
        forcing = [SpectralField(grid, coeffs.copy()) for _ in times]
        val = duhamel(PLUS_BRACKET_XI, forcing, times, t).coeffs[idx]
        errs.append(abs(val - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_duhamel_zero_symbol_mode(grid):
    # h(0) = 0 for the transport symbol: constant forcing integrates to c t
    c = 1.3 + 0.4j
    t = 0.5
    times = np.linspace(0, t, 5)
    coeffs = np.zeros(grid.n_modes, dtype=complex)
    coeffs[0] = c
    forcing = [SpectralField(grid, coeffs.copy()) for _ in times]
    val = duhamel(PLUS_XI, forcing, times, t).coeffs[0]
    assert abs(val - c * t) < 1e-14


def test_duhamel_offgrid_rejected(grid):
    times = np.linspace(0, 1, 5)
    forcing = [SpectralField.zero(grid) for _ in times]
    with pytest.raises(ValueError):
        duhamel(PLUS_XI, forcing, times, 0.3)
