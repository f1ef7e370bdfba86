"""Split field variables, dispersion groups and Duhamel integrals.

The coupled spinor/scalar system is evolved in the split variables
(psi_plus, psi_minus, phi_plus) whose linear flows are the scalar groups
with symbols +xi, -xi and +<xi>, acting modewise as exp(-i t h(xi)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .grid import GridSpec, SpectralField, require_same_grid


class DispersionSymbol:
    """One of the four dispersion symbols h(xi): +xi, -xi, +<xi>, -<xi>."""

    TAGS = ("plus_xi", "minus_xi", "plus_bracket_xi", "minus_bracket_xi")

    def __init__(self, tag: str):
        if tag not in self.TAGS:
            raise ValueError("unknown dispersion tag %r" % (tag,))
        self.tag = tag

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.tag == "plus_xi":
            return xi
        if self.tag == "minus_xi":
            return -xi
        if self.tag == "plus_bracket_xi":
            return np.sqrt(1.0 + xi**2)
        return -np.sqrt(1.0 + xi**2)

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        return self.evaluate(grid.frequencies)

    def __repr__(self):
        return "DispersionSymbol(%r)" % (self.tag,)

    def __eq__(self, other):
        return isinstance(other, DispersionSymbol) and self.tag == other.tag


PLUS_XI = DispersionSymbol("plus_xi")
MINUS_XI = DispersionSymbol("minus_xi")
PLUS_BRACKET_XI = DispersionSymbol("plus_bracket_xi")
MINUS_BRACKET_XI = DispersionSymbol("minus_bracket_xi")

#: symbols of the three split components, in component order
COMPONENT_SYMBOLS = (PLUS_XI, MINUS_XI, PLUS_BRACKET_XI)


@dataclass
class SplitState:
    """One time slice of the system in split variables."""

    psi_plus: SpectralField
    psi_minus: SpectralField
    phi_plus: SpectralField
    dirac_mass: float = 0.0
    kg_mass: float = 1.0
    s_index: float = 0.0
    r_index: float = 1.0 / 3.0

    def __post_init__(self):
        require_same_grid(self.psi_plus.grid, self.psi_minus.grid)
        require_same_grid(self.psi_plus.grid, self.phi_plus.grid)
        if self.dirac_mass < 0:
            raise ValueError("dirac_mass must be nonnegative")
        if self.kg_mass != 1.0:
            raise ValueError("kg_mass is fixed to 1 by rescaling")

    @property
    def grid(self) -> GridSpec:
        return self.psi_plus.grid

    def components(self) -> Tuple[SpectralField, SpectralField, SpectralField]:
        return (self.psi_plus, self.psi_minus, self.phi_plus)


def conj_coeffs(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate: conj(f)_hat(xi) = conj(f_hat(-xi))."""
    return np.conj(np.concatenate((coeffs[:1], coeffs[:0:-1])))


def split(
    psi: Tuple[SpectralField, SpectralField],
    phi: SpectralField,
    phi_dot: SpectralField,
    M: float,
) -> SplitState:
    """Change variables (psi, phi, phi_dot) -> (psi_plus, psi_minus, phi_plus).

    phi_plus = (phi + i <D>^{-1} phi_dot) / 2 modewise; the spinor components
    pass through unchanged.  phi and phi_dot must represent real functions.
    """
    psi_plus, psi_minus = psi
    require_same_grid(psi_plus.grid, phi.grid)
    require_same_grid(phi.grid, phi_dot.grid)
    g = phi.grid
    phi_plus = SpectralField(g, 0.5 * (phi.coeffs + 1j * phi_dot.coeffs / g.bracket))
    return SplitState(psi_plus, psi_minus, phi_plus, dirac_mass=M)


def unsplit(state: SplitState):
    """Invert split(): returns ((psi_plus, psi_minus), phi, phi_dot)."""
    g = state.grid
    pp = state.phi_plus.coeffs
    pm = conj_coeffs(pp)  # phi_minus = conj(phi_plus)
    phi = SpectralField(g, pp + pm)
    phi_dot = SpectralField(g, -1j * g.bracket * (pp - pm))
    return (state.psi_plus, state.psi_minus), phi, phi_dot


def group_apply(h: DispersionSymbol, t: float, f: SpectralField) -> SpectralField:
    """Apply the dispersion group: multiply mode xi by exp(-i t h(xi))."""
    return SpectralField(f.grid, np.exp(-1j * t * h.on_grid(f.grid)) * f.coeffs)


def duhamel(
    h: DispersionSymbol,
    forcing: Sequence[SpectralField],
    times: np.ndarray,
    t: float,
) -> SpectralField:
    """Trapezoidal quadrature of integral_{t_0}^{t} S_h(t - sigma) F(sigma) dsigma.

    The group phases are exact; only the forcing is interpolated.  t must be
    one of the grid times and the forcing must be given on every node up to t.
    """
    times = np.asarray(times, dtype=float)
    if len(forcing) != times.size:
        raise ValueError("one forcing slice per time node required")
    if times.size < 1:
        raise ValueError("empty time grid")
    steps = np.diff(times)
    if times.size > 1 and not np.allclose(steps, steps[0], rtol=1e-12, atol=1e-15):
        raise ValueError("time grid must be uniform")
    idx = np.searchsorted(times, t)
    if idx >= times.size or not np.isclose(times[idx], t, rtol=1e-12, atol=1e-12):
        raise ValueError("t = %g does not lie on the time grid" % t)

    grid = forcing[0].grid
    out = np.zeros(grid.n_modes, dtype=complex)
    if idx == 0:
        return SpectralField(grid, out)
    dt = float(steps[0])
    hvals = h.on_grid(grid)
    for j in range(idx + 1):
        w = 0.5 if j in (0, idx) else 1.0
        out += w * np.exp(-1j * (t - times[j]) * hvals) * forcing[j].coeffs
    return SpectralField(grid, dt * out)
