"""Convolution kernels, discretised cylindrical Wiener increments and the
Hilbert-Schmidt identities that calibrate the Ito correction.

The driving process is expanded in the orthonormal basis of normalised
grid-cell indicators e_k = 1_{cell k} / sqrt(dx); with this choice the
smoothed basis member K e_k is a shifted copy of the kernel and the identity
sum_k (K e_k(x))^2 = ||kernel||_{L^2}^2 holds exactly on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    SpectralField,
    forward_transform,
    l2_norm_physical,
    require_same_grid,
)


@dataclass
class NoiseKernel:
    """Real-valued convolution kernel with a declared Sobolev regularity."""

    kernel: SpectralField
    sobolev_reg: float = 0.0

    def __post_init__(self):
        samples = self.kernel.to_physical()
        scale = max(1.0, float(np.max(np.abs(samples))))
        if np.max(np.abs(samples.imag)) > 1e-12 * scale:
            raise ValueError("kernel must be real-valued in physical space")

    @property
    def grid(self) -> GridSpec:
        return self.kernel.grid

    def l2_norm(self) -> float:
        return l2_norm_physical(self.kernel.to_physical().real, self.grid)


def gaussian_kernel(grid: GridSpec, width: float, scale: float = 1.0,
                    sobolev_reg: float = 0.0) -> NoiseKernel:
    """Periodised Gaussian bump centred at x = 0."""
    if width <= 0:
        raise ValueError("width must be positive")
    d = np.minimum(grid.x, grid.domain_length - grid.x)
    samples = scale * np.exp(-0.5 * (d / width) ** 2)
    return NoiseKernel(forward_transform(samples, grid), sobolev_reg)


def sinc_kernel(grid: GridSpec, cutoff: float, scale: float = 1.0,
                sobolev_reg: float = 0.0) -> NoiseKernel:
    """Band-limited kernel with flat symbol on |xi| <= cutoff."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    coeffs = np.where(np.abs(grid.frequencies) <= cutoff, scale + 0.0j, 0.0j)
    return NoiseKernel(SpectralField(grid, coeffs), sobolev_reg)


def zero_kernel(grid: GridSpec) -> NoiseKernel:
    return NoiseKernel(SpectralField.zero(grid), 0.0)


def kernel_from_csv(path: str, grid: GridSpec, sobolev_reg: float = 0.0) -> NoiseKernel:
    """Load a kernel from a CSV file of n_modes physical-space samples."""
    samples = np.loadtxt(path, dtype=float, ndmin=1)
    if samples.shape != (grid.n_modes,):
        raise ValueError(
            "kernel file %r has %d samples, grid needs %d"
            % (path, samples.size, grid.n_modes)
        )
    return NoiseKernel(forward_transform(samples, grid), sobolev_reg)


def kernel_to_csv(kernel: NoiseKernel, path: str) -> None:
    np.savetxt(path, kernel.kernel.to_physical().real)


def convolve(kernel: NoiseKernel, f: SpectralField) -> SpectralField:
    """Circular convolution via the convolution theorem (modewise product)."""
    require_same_grid(kernel.grid, f.grid)
    return SpectralField(f.grid, kernel.kernel.coeffs * f.coeffs)


def ito_correction(k1: NoiseKernel) -> float:
    """Drift constant of the Stratonovich->Ito conversion, half the squared
    L^2 norm of the kernel."""
    return 0.5 * k1.l2_norm() ** 2


class CellBasis:
    """Orthonormal basis of normalised grid-cell indicator functions."""

    def __init__(self, grid: GridSpec, n_basis: int | None = None):
        self.grid = grid
        self.n_basis = grid.n_modes if n_basis is None else int(n_basis)
        if not 1 <= self.n_basis <= grid.n_modes:
            raise ValueError("n_basis must lie in [1, n_modes]")

    @property
    def complete(self) -> bool:
        return self.n_basis == self.grid.n_modes

    def members(self) -> np.ndarray:
        """(n_basis, n_modes) array of point values e_k(x_i)."""
        out = np.zeros((self.n_basis, self.grid.n_modes))
        out[np.arange(self.n_basis), np.arange(self.n_basis)] = (
            1.0 / np.sqrt(self.grid.dx)
        )
        return out

    def smoothed_members(self, kernel: NoiseKernel) -> np.ndarray:
        """(n_basis, n_modes) array of (K e_k)(x_i) = kernel(x_i - x_k) sqrt(dx)."""
        require_same_grid(self.grid, kernel.grid)
        ks = kernel.kernel.to_physical().real
        idx = (np.arange(self.grid.n_modes)[None, :]
               - np.arange(self.n_basis)[:, None]) % self.grid.n_modes
        return ks[idx] * np.sqrt(self.grid.dx)


def hs_norm_multiplication(v: SpectralField, kernel: NoiseKernel) -> float:
    """Hilbert-Schmidt norm of f -> v * (K f), computed by summing
    ||v * K e_k||_{L^2}^2 over the complete grid-cell basis."""
    require_same_grid(v.grid, kernel.grid)
    basis = CellBasis(v.grid)
    vp = v.to_physical()
    smoothed = basis.smoothed_members(kernel)
    total = np.sum(np.abs(vp[None, :] * smoothed) ** 2) * v.grid.dx
    return float(np.sqrt(total))


@dataclass
class WienerIncrements:
    """Matrix of independent N(0, dt) increments, one row per basis mode."""

    n_basis: int
    n_steps: int
    dt: float
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        if self.increments.shape != (self.n_basis, self.n_steps):
            raise ValueError("increment matrix has wrong shape")


def sample_increments(seed: int, K: int, n_steps: int, dt: float) -> WienerIncrements:
    """Deterministic sampling of the increment matrix from a seed."""
    if K < 1 or n_steps < 1:
        raise ValueError("K and n_steps must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    inc = np.sqrt(dt) * rng.standard_normal((K, n_steps))
    return WienerIncrements(K, n_steps, dt, inc, seed)


def coarsen_increments(w: WienerIncrements, factor: int) -> WienerIncrements:
    """Aggregate adjacent increments, giving the same Brownian path on a
    coarser step (n_steps must be divisible by factor)."""
    if w.n_steps % factor != 0:
        raise ValueError("n_steps not divisible by coarsening factor")
    inc = w.increments.reshape(w.n_basis, w.n_steps // factor, factor).sum(axis=2)
    return WienerIncrements(w.n_basis, w.n_steps // factor, w.dt * factor, inc, w.seed)


def smoothed_increment_field(
    kernel: NoiseKernel, dW_column: np.ndarray, basis: CellBasis
) -> np.ndarray:
    """Point values of sum_k (K e_k)(x) dW_k for one time step.

    For the complete basis this is sqrt(dx) times the circular convolution of
    the kernel samples with the increment vector, done by FFT; a truncated
    basis falls back to the explicit sum.
    """
    dW_column = np.asarray(dW_column, dtype=float)
    if dW_column.shape != (basis.n_basis,):
        raise ValueError("increment column has wrong length")
    g = basis.grid
    ks = kernel.kernel.to_physical().real
    if basis.complete:
        conv = np.fft.ifft(np.fft.fft(ks) * np.fft.fft(dW_column)).real
        return np.sqrt(g.dx) * conv
    return dW_column @ basis.smoothed_members(kernel)


def noise_increment_dirac(
    psi_other: SpectralField,
    k1: NoiseKernel,
    dW_column: np.ndarray,
    basis: CellBasis,
) -> SpectralField:
    """Spectral coefficients of psi_other(x) * sum_k (K1 e_k)(x) dW_k."""
    require_same_grid(psi_other.grid, k1.grid)
    zeta = smoothed_increment_field(k1, dW_column, basis)
    return forward_transform(psi_other.to_physical() * zeta, psi_other.grid)


def noise_increment_kg(
    phi: SpectralField,
    k2: NoiseKernel,
    dW_column: np.ndarray,
    basis: CellBasis,
) -> SpectralField:
    """Spectral coefficients of (1/2) <D>^{-1} [phi(x) * sum_k (K2 e_k)(x) dW_k]."""
    require_same_grid(phi.grid, k2.grid)
    zeta = smoothed_increment_field(k2, dW_column, basis)
    prod = forward_transform(phi.to_physical() * zeta, phi.grid)
    return SpectralField(phi.grid, 0.5 * prod.coeffs / phi.grid.bracket)
