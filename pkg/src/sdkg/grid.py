"""Periodic spatial grid, discrete Fourier conventions and Sobolev norms.

Convention: f_hat(xi) = integral e^{-i x xi} f(x) dx, discretised as the
dx-weighted DFT on a torus of circumference L with frequencies
xi_k = 2*pi*k/L, k in {-n/2, ..., n/2-1} (stored in FFT order).  The inverse
carries the 1/(2*pi) factor, so forward/inverse round-trip exactly and the
discrete Plancherel identity sum |f_hat|^2 / L = integral |f|^2 dx holds to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridSpec:
    """Uniform periodic grid with n_modes points on [0, domain_length)."""

    n_modes: int
    domain_length: float
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    frequencies: np.ndarray = field(init=False, repr=False)
    bracket: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_modes < 8 or self.n_modes % 2 != 0:
            raise ValueError("n_modes must be an even integer >= 8")
        if self.domain_length <= 0:
            raise ValueError("domain_length must be positive")
        self.dx = self.domain_length / self.n_modes
        self.x = self.dx * np.arange(self.n_modes)
        # xi_k = 2*pi*k/L in FFT order (0, 1, ..., -n/2, ..., -1)
        self.frequencies = 2.0 * np.pi * np.fft.fftfreq(self.n_modes, d=self.dx)
        self.bracket = np.sqrt(1.0 + self.frequencies**2)

    @property
    def mode_weight(self) -> float:
        """Quadrature weight d(xi)/(2*pi) = 1/L of one Fourier mode."""
        return 1.0 / self.domain_length

    def dealias_mask(self) -> np.ndarray:
        """Boolean mask keeping the low two thirds of the spectrum."""
        k = np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes)
        return np.abs(k) < self.n_modes / 3.0

    def __eq__(self, other):
        return (
            isinstance(other, GridSpec)
            and self.n_modes == other.n_modes
            and self.domain_length == other.domain_length
        )


class SpectralField:
    """Complex Fourier coefficients of a function on a periodic grid."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: GridSpec, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (grid.n_modes,):
            raise ValueError(
                "coefficient length %d does not match n_modes %d"
                % (coeffs.size, grid.n_modes)
            )
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zero(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.n_modes, dtype=complex))

    def to_physical(self) -> np.ndarray:
        """Point values on the grid (inverse transform)."""
        return np.fft.ifft(self.coeffs) / self.grid.dx

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def require_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


def forward_transform(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """dx-weighted DFT of point samples."""
    samples = np.asarray(samples)
    if samples.shape != (grid.n_modes,):
        raise ValueError(
            "sample length %d does not match n_modes %d"
            % (samples.size, grid.n_modes)
        )
    return SpectralField(grid, grid.dx * np.fft.fft(samples))


def inverse_transform(f: SpectralField) -> np.ndarray:
    return f.to_physical()


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm (sum <xi>^{2s} |f_hat|^2 / L)^{1/2}; s = 0 gives the L^2 norm."""
    w = f.grid.bracket ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2) * f.grid.mode_weight))


def l2_norm_physical(samples: np.ndarray, grid: GridSpec) -> float:
    """L^2 norm by spatial quadrature, (sum |f|^2 dx)^{1/2}."""
    return float(np.sqrt(np.sum(np.abs(samples) ** 2) * grid.dx))


def dealias(f: SpectralField) -> SpectralField:
    """Zero the top third of the spectrum (2/3-rule for bilinear products)."""
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask())
