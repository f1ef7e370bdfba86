"""Temporal H^b norms, dispersive space-time restriction norms, the modified
(Slobodeckij) norm used inside cutoffs, smooth truncation profiles and
stopping times.

All restriction norms are computed through the sharp-cutoff (zero extension)
form, which for |b| < 1/2 is equivalent to the infimum-over-extensions norm
with interval-independent constants.  Time series are interpreted as cell
values of a piecewise-constant function; the temporal transform of such a
function is known in closed form, which lets the frequency integral be
extended far beyond the Nyquist range of the sample grid (periodic images of
the DFT times an explicit decaying factor) and finished with an analytic
power-law tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .grid import GridSpec, SpectralField
from .model import DispersionSymbol


# ---------------------------------------------------------------------------
# temporal H^b norm of a sharply cut off series
# ---------------------------------------------------------------------------

def _tail_integral(A: np.ndarray, b: float) -> np.ndarray:
    # int_A^infty <tau>^{2b} tau^{-2} dtau, two-term expansion for large A
    return A ** (2 * b - 1) / (1 - 2 * b) + b * A ** (2 * b - 3) / (3 - 2 * b)


def _hb_norm_sq_batch(
    rows: np.ndarray,
    dt: float,
    b: float,
    pad_factor: int = 8,
    n_periods: int = 32,
) -> np.ndarray:
    """Squared H^b(R) norms of the zero extensions of piecewise-constant
    series (one per row, samples are cell values with spacing dt).

    Valid for -1/2 < b < 1/2.  The norm carries the d(tau)/(2*pi) weight, so
    b = 0 reproduces the L^2(dt) norm of the series.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    if not -0.5 < b < 0.5:
        raise ValueError("temporal exponent must satisfy |b| < 1/2")
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_samples = rows.shape[1]
    nfft = pad_factor * n_samples
    comb = np.fft.fft(rows, n=nfft, axis=1)
    tau = 2.0 * np.pi * np.fft.fftfreq(nfft, d=dt)
    # |F(phi)(tau)|^2 = |comb|^2 * (2 - 2 cos(dt tau)) / tau^2, periodic
    # numerator, decaying denominator
    num = np.abs(comb) ** 2 * (2.0 - 2.0 * np.cos(dt * tau))
    period = 2.0 * np.pi / dt
    weights = np.zeros(nfft)
    for ell in range(-n_periods, n_periods + 1):
        shifted = tau + ell * period
        g = (1.0 + shifted**2) ** b / np.where(shifted == 0.0, 1.0, shifted**2)
        if ell == 0:
            g[0] = 0.0  # tau = 0 cell added in closed form below
        weights += g
    edge = (n_periods + 0.5) * period
    weights += (_tail_integral(edge + tau, b) + _tail_integral(edge - tau, b)) / period
    total = num @ weights
    total += np.abs(comb[:, 0]) ** 2 * dt**2  # removable singularity at tau = 0
    dtau = 2.0 * np.pi / (nfft * dt)
    return total * dtau / (2.0 * np.pi)


def _refine_hb(rows, dt, b, pad_factor, n_periods, rtol, max_pad_factor):
    """Double the tau resolution until the total changes by less than rtol."""
    val = _hb_norm_sq_batch(rows, dt, b, pad_factor, n_periods)
    if rtol is None:
        return val
    while pad_factor < max_pad_factor:
        pad_factor *= 2
        new = _hb_norm_sq_batch(rows, dt, b, pad_factor, n_periods)
        ref = float(np.sqrt(np.sum(new)))
        if abs(np.sqrt(np.sum(val)) - ref) <= rtol * max(ref, 1e-300):
            return new
        val = new
    return val


def hb_norm_sharp_cutoff(
    values: Sequence[complex],
    b: float,
    dt: float | None = None,
    times: np.ndarray | None = None,
    pad_factor: int = 8,
    n_periods: int = 32,
    rtol: float = 1e-3,
    max_pad_factor: int = 256,
) -> float:
    """H^b norm of the zero-extended series of cell values on its interval.

    Exactly one of dt / times must be given; times must be uniform.  The tau
    resolution is refined until the value changes by less than rtol.
    """
    if not 0 < b < 0.5:
        raise ValueError("b must lie in (0, 1/2)")
    if times is not None:
        times = np.asarray(times, dtype=float)
        steps = np.diff(times)
        if steps.size == 0:
            raise ValueError("need at least two time samples")
        if not np.allclose(steps, steps[0], rtol=1e-10, atol=1e-14):
            raise ValueError("time grid must be uniform")
        dt = float(steps[0])
    if dt is None:
        raise ValueError("either dt or times is required")
    values = np.asarray(values, dtype=complex)
    val = _refine_hb(values[None, :], dt, b, pad_factor, n_periods, rtol,
                     max_pad_factor)
    return float(np.sqrt(val[0]))


# ---------------------------------------------------------------------------
# space-time paths and restriction norms
# ---------------------------------------------------------------------------

@dataclass
class NormSpec:
    """Identifies one restriction norm: spatial index s, temporal index b in
    (0, 1/2), dispersion symbol and time interval."""

    s: float
    b: float
    symbol: DispersionSymbol
    interval: Tuple[float, float]

    def __post_init__(self):
        if not 0 < self.b < 0.5:
            raise ValueError("b must lie in (0, 1/2)")
        S, T = self.interval
        if not 0 <= S < T:
            raise ValueError("interval must satisfy 0 <= S < T")


class SpaceTimePath:
    """Uniformly sampled path of spectral fields: one slice per time."""

    def __init__(self, grid: GridSpec, times: np.ndarray, slices):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        if isinstance(slices, np.ndarray):
            values = np.asarray(slices, dtype=complex)
        else:
            values = np.array([f.coeffs for f in slices], dtype=complex)
        if values.shape != (self.times.size, grid.n_modes):
            raise ValueError("need one slice of n_modes coefficients per time")
        steps = np.diff(self.times)
        if steps.size == 0:
            raise ValueError("a path needs at least two time samples")
        if not np.allclose(steps, steps[0], rtol=1e-10, atol=1e-14):
            raise ValueError("time grid must be uniform")
        self.values = values
        self.dt = float(steps[0])

    def slice_at(self, index: int) -> SpectralField:
        return SpectralField(self.grid, self.values[index].copy())

    def cell_range(self, interval: Tuple[float, float]) -> Tuple[int, int]:
        """Indices (i0, i1) of the sample cells covering [S, T)."""
        S, T = interval
        i0 = int(round((S - self.times[0]) / self.dt))
        i1 = int(round((T - self.times[0]) / self.dt))
        ok = (
            0 <= i0 < i1 <= self.times.size - 1
            and abs(self.times[0] + i0 * self.dt - S) < 1e-9 * max(1.0, abs(S))
            and abs(self.times[0] + i1 * self.dt - T) < 1e-9 * max(1.0, abs(T))
        )
        if not ok:
            raise ValueError("interval (%g, %g) is not covered by the path" % (S, T))
        return i0, i1


def path_profile(
    path: SpaceTimePath, s: float, symbol: DispersionSymbol, i0: int, i1: int
) -> np.ndarray:
    """(cells, modes) array U(t, xi) = <xi>^s e^{i t h(xi)} u_hat(t, xi)."""
    h = symbol.on_grid(path.grid)
    t = path.times[i0:i1, None]
    return (path.grid.bracket**s)[None, :] * np.exp(1j * t * h[None, :]) \
        * path.values[i0:i1, :]


def xsb_norm_raw(
    path: SpaceTimePath,
    s: float,
    b: float,
    symbol: DispersionSymbol,
    interval: Tuple[float, float],
    pad_factor: int = 8,
    n_periods: int = 32,
    rtol: float = 1e-3,
    max_pad_factor: int = 128,
) -> float:
    """Restriction norm via the sharp cutoff, any |b| < 1/2."""
    i0, i1 = path.cell_range(interval)
    U = path_profile(path, s, symbol, i0, i1)
    per_mode = _refine_hb(U.T, path.dt, b, pad_factor, n_periods, rtol,
                          max_pad_factor)
    return float(np.sqrt(np.sum(per_mode) * path.grid.mode_weight))


def xsb_norm(path: SpaceTimePath, spec: NormSpec, **kwargs) -> float:
    """Dispersive space-time restriction norm on spec.interval."""
    return xsb_norm_raw(path, spec.s, spec.b, spec.symbol, spec.interval, **kwargs)


def modified_norm(path: SpaceTimePath, spec: NormSpec) -> float:
    """Interval-scaled L^2 term plus Slobodeckij double integral, an
    equivalent form of the restriction norm that is exactly computable from
    the samples (no temporal transform)."""
    i0, i1 = path.cell_range(spec.interval)
    U = path_profile(path, spec.s, spec.symbol, i0, i1)
    S, T = spec.interval
    dt = path.dt
    nsq = np.sum(np.abs(U) ** 2, axis=1)          # per-cell squared H^s mass
    l2_part = (T - S) ** (-2.0 * spec.b) * dt * np.sum(nsq)
    gram = U @ U.conj().T
    diff = nsq[:, None] + nsq[None, :] - 2.0 * gram.real
    m = U.shape[0]
    gaps = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :]) * dt
    np.fill_diagonal(gaps, 1.0)
    kern = gaps ** (-1.0 - 2.0 * spec.b)
    np.fill_diagonal(kern, 0.0)
    dbl_part = dt**2 * np.sum(diff * kern)
    return float(np.sqrt((l2_part + dbl_part) * path.grid.mode_weight))


def slobodeckij_seminorm(
    values: Sequence[complex],
    b: float,
    dt: float,
) -> float:
    """Fractional difference-quotient seminorm of a scalar series of cell
    values (square root of the double sum over off-diagonal cells)."""
    values = np.asarray(values, dtype=complex)
    if values.size < 2:
        raise ValueError("need at least two samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    diff = np.abs(values[:, None] - values[None, :]) ** 2
    gaps = np.abs(np.arange(values.size)[:, None] - np.arange(values.size)[None, :]) * dt
    np.fill_diagonal(gaps, 1.0)
    kern = gaps ** (-1.0 - 2.0 * b)
    np.fill_diagonal(kern, 0.0)
    return float(np.sqrt(np.sum(diff * kern) * dt**2))


# ---------------------------------------------------------------------------
# smooth cutoff profile and state cutoffs
# ---------------------------------------------------------------------------

def theta_profile(y) -> np.ndarray:
    """Even C^2 bump: 1 on [-1, 1], quintic smoothstep taper to 0 on [1, 2],
    0 beyond.  max|theta'| = 15/8, max|theta''| = 10/sqrt(3)."""
    y = np.abs(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    out[y <= 1.0] = 1.0
    mid = (y > 1.0) & (y < 2.0)
    z = y[mid] - 1.0
    out[mid] = 1.0 - z**3 * (10.0 + z * (-15.0 + 6.0 * z))
    return out


THETA_LIPSCHITZ = 15.0 / 8.0          # sup |theta'|
THETA_SECOND_DERIVATIVE = 10.0 / np.sqrt(3.0)  # sup |theta''|


@dataclass
class CutoffSpec:
    """Truncation radius R for the rescaled profile theta(x / R)."""

    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")


def theta_cutoff(x, spec: CutoffSpec):
    """theta_R(x) = theta(x / R); equals 1 for |x| <= R, 0 for |x| >= 2R."""
    val = theta_profile(np.asarray(x, dtype=float) / spec.R)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(val)
    return val


class RunningModifiedNorm:
    """Incrementally maintained squared modified norms of a multicomponent
    path on the growing intervals (0, t_q).

    Slices are appended one at a time; the squared norm with q cells is
      f_c(t) = t^{-2b} * L2cum[q] + DBLcum[q]
    per component c, with the double sum extended by one row per appended
    slice.  Cross terms against the stored history are batched as matrix
    products, which is what makes long trajectories affordable.
    """

    def __init__(
        self,
        grid: GridSpec,
        dt: float,
        b: float,
        s_indices: Sequence[float],
        symbols: Sequence[DispersionSymbol],
        capacity: int,
    ):
        if not 0 < b < 0.5:
            raise ValueError("b must lie in (0, 1/2)")
        self.grid = grid
        self.dt = float(dt)
        self.b = float(b)
        self.n_comp = len(s_indices)
        if len(symbols) != self.n_comp:
            raise ValueError("one symbol per component required")
        self.sweights = [grid.bracket**s * np.sqrt(grid.mode_weight)
                         for s in s_indices]
        self.hvals = [sym.on_grid(grid) for sym in symbols]
        n = grid.n_modes
        self.prof = [np.zeros((capacity, n), dtype=complex) for _ in range(self.n_comp)]
        self.nrm = [np.zeros(capacity) for _ in range(self.n_comp)]
        self.l2cum = [np.zeros(capacity + 1) for _ in range(self.n_comp)]
        self.dblcum = [np.zeros(capacity + 1) for _ in range(self.n_comp)]
        # (dt * gap)^(-1-2b) lookup for gaps 1 .. capacity
        self.ipow = (self.dt * np.arange(1, capacity + 1)) ** (-1.0 - 2.0 * b)
        self.count = 0

    def profile_row(self, comp: int, t: float, coeffs: np.ndarray) -> np.ndarray:
        return self.sweights[comp] * np.exp(1j * t * self.hvals[comp]) * coeffs

    def append(self, t: float, coeff_rows: Sequence[np.ndarray]) -> None:
        """Append the slice at time t (one coefficient row per component)."""
        q = self.count
        for c in range(self.n_comp):
            row = self.profile_row(c, t, coeff_rows[c])
            nrow = float(np.sum(np.abs(row) ** 2))
            cross = 0.0
            if q > 0:
                inner = (self.prof[c][:q] @ row.conj()).real
                d = self.nrm[c][:q] + nrow - 2.0 * inner
                cross = float(d @ self.ipow[:q][::-1])
            self.prof[c][q] = row
            self.nrm[c][q] = nrow
            self.l2cum[c][q + 1] = self.l2cum[c][q] + self.dt * nrow
            self.dblcum[c][q + 1] = self.dblcum[c][q] + 2.0 * self.dt**2 * cross
        self.count = q + 1

    def value_sq(self, q: int, t: float) -> float:
        """Sum over components of the squared modified norm with q cells,
        evaluated for the interval (0, t)."""
        if q == 0:
            return 0.0
        tot = 0.0
        for c in range(self.n_comp):
            tot += t ** (-2.0 * self.b) * self.l2cum[c][q] + self.dblcum[c][q]
        return tot

    def component_value_sq(self, comp: int, q: int, t: float) -> float:
        if q == 0:
            return 0.0
        return t ** (-2.0 * self.b) * self.l2cum[comp][q] + self.dblcum[comp][q]


def running_cutoff_series(
    paths: Sequence[SpaceTimePath],
    spec: CutoffSpec,
    norm_specs: Sequence[NormSpec],
) -> np.ndarray:
    """Theta series over the shared time grid of a multicomponent path:
    Theta(t_q) = theta_R(sum of squared modified norms on (0, t_q))."""
    if not paths:
        raise ValueError("empty path")
    times = paths[0].times
    grid = paths[0].grid
    for p in paths[1:]:
        if p.times.shape != times.shape or not np.allclose(p.times, times):
            raise ValueError("components must share one time grid")
    b = norm_specs[0].b
    run = RunningModifiedNorm(
        grid, paths[0].dt, b,
        [ns.s for ns in norm_specs], [ns.symbol for ns in norm_specs],
        capacity=times.size,
    )
    theta = np.empty(times.size)
    for q, t in enumerate(times):
        theta[q] = theta_cutoff(run.value_sq(q, t) if q else 0.0, spec)
        if q < times.size:
            run.append(t, [p.values[q] for p in paths])
    return theta


def theta_state_cutoff(
    paths: Sequence[SpaceTimePath],
    spec: CutoffSpec,
    norm_specs: Sequence[NormSpec],
) -> float:
    """Cutoff value at the final path time (see running_cutoff_series)."""
    return float(running_cutoff_series(paths, spec, norm_specs)[-1])


def stopping_time(
    f_values: Sequence[float],
    times: Sequence[float],
    R: float,
    horizon: float,
) -> float:
    """First time the continuous nonnegative series f reaches R, refined by
    linear interpolation between samples; horizon if it never does."""
    f = np.asarray(f_values, dtype=float)
    t = np.asarray(times, dtype=float)
    if f.shape != t.shape or f.size == 0:
        raise ValueError("f and times must be matching nonempty series")
    if f[0] != 0.0:
        raise ValueError("running series must start at f(t0) = 0")
    above = np.nonzero(f >= R)[0]
    if above.size == 0:
        return float(horizon)
    i = int(above[0])
    if i == 0:
        return float(t[0])
    frac = (R - f[i - 1]) / (f[i] - f[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))
