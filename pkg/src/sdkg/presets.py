"""Named initial-data presets shared by the command-line driver and the
diagnostic suites."""

from __future__ import annotations

import numpy as np

from .grid import GridSpec, forward_transform
from .model import SplitState, split


def gaussian_wavepacket_state(
    grid: GridSpec,
    center: float | None = None,
    width: float = 2.0,
    shift: float = 1.0,
    amplitude: float = 0.0125,
    phi_amplitude: float | None = None,
    dirac_mass: float = 0.0,
    band_limit: float | None = None,
) -> SplitState:
    """Counter-propagating Gaussian wavepackets for the spinor pair and a
    Gaussian bump at rest for the scalar; split into the diagonal variables.

    phi_amplitude defaults to the spinor amplitude.  band_limit, when given,
    truncates the spectrum of every component to |xi| <= band_limit after
    the transform.
    """
    c = grid.domain_length / 2.0 if center is None else center
    a_phi = amplitude if phi_amplitude is None else phi_amplitude
    env = np.exp(-0.5 * ((grid.x - c) / width) ** 2)
    psi_p = forward_transform(amplitude * env * np.exp(1j * shift * grid.x), grid)
    psi_m = forward_transform(amplitude * env * np.exp(-1j * shift * grid.x), grid)
    phi = forward_transform(a_phi * env, grid)
    phi_dot = forward_transform(np.zeros(grid.n_modes), grid)
    state = split((psi_p, psi_m), phi, phi_dot, M=dirac_mass)
    if band_limit is not None:
        keep = np.abs(grid.frequencies) <= band_limit
        for f in state.components():
            f.coeffs *= keep
    return state


def single_mode_state(grid: GridSpec, k: int, amplitude: float = 1.0,
                      dirac_mass: float = 0.0) -> SplitState:
    """Pure oscillation e^{i xi_k x} in the spinor pair, cosine in the scalar."""
    xi = 2.0 * np.pi * k / grid.domain_length
    mode = np.exp(1j * xi * grid.x)
    psi_p = forward_transform(amplitude * mode, grid)
    psi_m = forward_transform(amplitude * np.conj(mode), grid)
    phi = forward_transform(amplitude * np.cos(xi * grid.x), grid)
    phi_dot = forward_transform(np.zeros(grid.n_modes), grid)
    return split((psi_p, psi_m), phi, phi_dot, M=dirac_mass)


def state_from_csv(path: str, grid: GridSpec, dirac_mass: float = 0.0) -> SplitState:
    """Load physical-space samples from a CSV file with six columns:
    Re/Im of the two spinor components, then phi and phi_dot."""
    data = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if data.shape != (grid.n_modes, 6):
        raise ValueError(
            "initial-data file %r must have n_modes=%d rows and 6 columns"
            % (path, grid.n_modes)
        )
    psi_p = forward_transform(data[:, 0] + 1j * data[:, 1], grid)
    psi_m = forward_transform(data[:, 2] + 1j * data[:, 3], grid)
    phi = forward_transform(data[:, 4], grid)
    phi_dot = forward_transform(data[:, 5], grid)
    return split((psi_p, psi_m), phi, phi_dot, M=dirac_mass)
