"""Empirical probes of the bilinear and cutoff estimates, charge diagnostics,
growth monitors for the truncation ladder, and the Ito/Stratonovich weak
consistency check.

Probes report empirical constants; the inequalities they exercise hold with
unspecified constants, so the reports record the observed maxima and their
stability under mesh refinement rather than asserting particular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bourgain import (
    CutoffSpec,
    NormSpec,
    SpaceTimePath,
    running_cutoff_series,
    xsb_norm_raw,
)
from .dynamics import SolverConfig, SubintervalDivergence, TrajectoryRecord, \
    solve_trajectory
from .grid import GridSpec, SpectralField, sobolev_norm
from .model import (
    COMPONENT_SYMBOLS,
    MINUS_XI,
    PLUS_BRACKET_XI,
    PLUS_XI,
    DispersionSymbol,
    SplitState,
    group_apply,
)
from .noise import (
    NoiseKernel,
    WienerIncrements,
    coarsen_increments,
    ito_correction,
    sample_increments,
)

PROBE_IDS = ("dirac_plus", "dirac_minus", "kg_source")


def charge(state: SplitState) -> float:
    """Total spinor mass, conserved by the continuum dynamics."""
    return (
        sobolev_norm(state.psi_plus, 0.0) ** 2
        + sobolev_norm(state.psi_minus, 0.0) ** 2
    )


# ---------------------------------------------------------------------------
# random band-limited space-time test fields
# ---------------------------------------------------------------------------

def random_spacetime_path(
    rng: np.random.Generator,
    grid: GridSpec,
    n_times: int,
    horizon: float,
    symbol: DispersionSymbol,
    space_decay: float = 1.0,
    time_decay: float = 1.0,
    refinement: int = 1,
) -> SpaceTimePath:
    """Random field with Gaussian coefficients damped along the dispersion
    relation, band-limited to a quarter of the lattice in both directions so
    that pointwise products stay alias-free.

    The same rng draw embedded at refinement > 1 reproduces the identical
    continuum field on a finer lattice.
    """
    base_t, base_x = n_times, grid.n_modes
    dt = horizon / base_t
    tau = 2.0 * np.pi * np.fft.fftfreq(base_t, d=dt)
    xi = grid.frequencies
    h = symbol.on_grid(grid)
    envelope = (
        (1.0 + (tau[:, None] + h[None, :]) ** 2) ** (-time_decay / 2.0)
        * (grid.bracket[None, :]) ** (-space_decay)
    )
    keep_t = np.abs(np.fft.fftfreq(base_t, d=1.0 / base_t)) <= base_t / 4
    keep_x = np.abs(np.fft.fftfreq(base_x, d=1.0 / base_x)) <= base_x / 4
    coef = (
        rng.standard_normal((base_t, base_x))
        + 1j * rng.standard_normal((base_t, base_x))
    ) * envelope * keep_t[:, None] * keep_x[None, :]

    if refinement > 1:
        fine_grid = GridSpec(base_x * refinement, grid.domain_length)
        fine = np.zeros((base_t * refinement, base_x * refinement), dtype=complex)
        it = np.fft.fftfreq(base_t, d=1.0 / base_t).astype(int)
        ix = np.fft.fftfreq(base_x, d=1.0 / base_x).astype(int)
        fine[np.ix_(it, ix)] = coef[np.ix_(np.arange(base_t), np.arange(base_x))]
        coef, grid = fine, fine_grid
        n_times = base_t * refinement
        dt = horizon / n_times

    slices = np.fft.ifft(coef, axis=0) / dt          # u_hat(t_j, xi)
    slices = np.vstack([slices, slices[:1]])         # periodic wrap at t = T
    times = dt * np.arange(n_times + 1)
    return SpaceTimePath(grid, times, slices)


def pointwise_product_path(a: SpaceTimePath, b: SpaceTimePath,
                           conjugate_first: bool = False) -> SpaceTimePath:
    """Sliced pointwise product (optionally conj(a) * b), exact for
    band-limited inputs."""
    g = a.grid
    pa = np.fft.ifft(a.values, axis=1) / g.dx
    pb = np.fft.ifft(b.values, axis=1) / g.dx
    if conjugate_first:
        pa = np.conj(pa)
    prod = g.dx * np.fft.fft(pa * pb, axis=1)
    return SpaceTimePath(g, a.times, prod)


def xsb_norm_dual_route(
    path: SpaceTimePath,
    s: float,
    b: float,
    symbol: DispersionSymbol,
    interval,
    pad_factor: int = 8,
) -> float:
    """Norm of the sharply cut off path evaluated through the pairing with
    its explicit extremal dual function: the dual is assembled in frequency
    space, transported back, and the pairing integral is a physical-space
    quadrature.  Coincides with the direct route up to discretisation."""
    i0, i1 = path.cell_range(interval)
    g = path.grid
    cells = path.values[i0:i1]
    m = cells.shape[0]
    dt = path.dt
    npad = pad_factor * m
    w_phys = np.zeros((npad, g.n_modes), dtype=complex)
    w_phys[:m] = np.fft.ifft(cells, axis=1) / g.dx
    w_hat = dt * g.dx * np.fft.fft2(w_phys)
    tau = 2.0 * np.pi * np.fft.fftfreq(npad, d=dt)
    weight = (
        g.bracket[None, :] ** (2.0 * s)
        * (1.0 + (tau[:, None] + symbol.on_grid(g)[None, :]) ** 2) ** b
    )
    v_phys = np.fft.ifft2(weight * w_hat) / (dt * g.dx)
    pairing = np.sum(w_phys * np.conj(v_phys)).real * dt * g.dx
    return float(np.sqrt(max(pairing, 0.0)))


# ---------------------------------------------------------------------------
# bilinear probes
# ---------------------------------------------------------------------------

@dataclass
class ProbeReport:
    estimate_id: str
    parameters: Dict[str, float]
    n_trials: int
    max_ratio: float
    ratio_quantiles: List[float]
    mesh_refinement_trend: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not np.isfinite(self.max_ratio):
            raise ValueError("probe produced a non-finite ratio")
        if any(q2 < q1 for q1, q2 in
               zip(self.ratio_quantiles, self.ratio_quantiles[1:])):
            raise ValueError("quantiles must be nondecreasing")

    def to_dict(self) -> dict:
        return {
            "estimate_id": self.estimate_id,
            "parameters": self.parameters,
            "n_trials": self.n_trials,
            "max_ratio": self.max_ratio,
            "ratio_quantiles": self.ratio_quantiles,
            "mesh_refinement_trend": self.mesh_refinement_trend,
        }


def validate_probe_range(s: float, r: float, b: float) -> None:
    if not (s > -0.25 and abs(s) <= r <= s + 1 and 0 < r < 1 + 2 * s):
        raise ValueError(
            "indices outside the admissible range: need s > -1/4, "
            "|s| <= r <= s+1 and 0 < r < 1+2s (got s=%g, r=%g)" % (s, r)
        )
    if not 0.25 < b < 0.5:
        raise ValueError("b=%g outside (1/4, 1/2)" % b)


def _bilinear_trial(rng, estimate_id, s, r, b, grid, n_times, horizon,
                    refinement, norm_kwargs):
    T = horizon
    interval = (0.0, T)
    if estimate_id == "kg_source":
        u = random_spacetime_path(rng, grid, n_times, T, PLUS_XI,
                                  refinement=refinement)
        v = random_spacetime_path(rng, grid, n_times, T, MINUS_XI,
                                  refinement=refinement)
        prod = pointwise_product_path(u, v, conjugate_first=True)
        lhs = max(
            xsb_norm_raw(prod, r - 1.0, -b, PLUS_BRACKET_XI, interval, **norm_kwargs),
            xsb_norm_raw(prod, r - 1.0, -b,
                         DispersionSymbol("minus_bracket_xi"), interval,
                         **norm_kwargs),
        )
        rhs = (
            xsb_norm_raw(u, s, b, PLUS_XI, interval, **norm_kwargs)
            * xsb_norm_raw(v, s, b, MINUS_XI, interval, **norm_kwargs)
        )
    else:
        out_sym, in_sym = (
            (PLUS_XI, MINUS_XI) if estimate_id == "dirac_plus"
            else (MINUS_XI, PLUS_XI)
        )
        phi = random_spacetime_path(rng, grid, n_times, T, PLUS_BRACKET_XI,
                                    refinement=refinement)
        psi = random_spacetime_path(rng, grid, n_times, T, in_sym,
                                    refinement=refinement)
        prod = pointwise_product_path(phi, psi)
        lhs = xsb_norm_raw(prod, s, -b, out_sym, interval, **norm_kwargs)
        rhs = (
            xsb_norm_raw(phi, r, b, PLUS_BRACKET_XI, interval, **norm_kwargs)
            * xsb_norm_raw(psi, s, b, in_sym, interval, **norm_kwargs)
        )
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


def probe_bilinear(
    estimate_id: str,
    s: float,
    r: float,
    b: float,
    n_trials: int,
    seed: int,
    n_modes: int = 64,
    n_times: int = 64,
    domain_length: float = 16.0 * np.pi,
    horizon: float = 1.0,
    refinements: Sequence[int] = (1, 2),
    force: bool = False,
) -> ProbeReport:
    """Sample the quotient lhs/rhs of one bilinear space-time estimate over
    random band-limited fields, at each mesh refinement level."""
    if estimate_id not in PROBE_IDS:
        raise ValueError("unknown estimate id %r (choose from %s)"
                         % (estimate_id, PROBE_IDS))
    if not force:
        validate_probe_range(s, r, b)
    norm_kwargs = dict(rtol=None, pad_factor=8, n_periods=16)
    grid = GridSpec(n_modes, domain_length)
    level_max: List[float] = []
    ratios_base: List[float] = []
    for refinement in refinements:
        rng = np.random.default_rng(seed)
        ratios = [
            _bilinear_trial(rng, estimate_id, s, r, b, grid, n_times, horizon,
                            refinement, norm_kwargs)
            for _ in range(n_trials)
        ]
        level_max.append(float(np.max(ratios)))
        if refinement == refinements[0]:
            ratios_base = ratios
    qs = np.quantile(ratios_base, [0.5, 0.9, 1.0])
    return ProbeReport(
        estimate_id=estimate_id,
        parameters={"s": s, "r": r, "b": b, "n_modes": n_modes,
                    "n_times": n_times, "horizon": horizon, "seed": seed},
        n_trials=n_trials,
        max_ratio=level_max[0],
        ratio_quantiles=[float(q) for q in qs],
        mesh_refinement_trend=level_max,
    )


# ---------------------------------------------------------------------------
# cutoff-estimate probes
# ---------------------------------------------------------------------------

def probe_cutoff_bounds(
    b: float,
    n_trials: int,
    seed: int,
    n_modes: int = 32,
    n_times: int = 64,
    domain_length: float = 8.0 * np.pi,
    horizon: float = 1.0,
    s_indices: Sequence[float] = (0.0, 0.0, 1.0 / 3.0),
    refinements: Sequence[int] = (1, 2),
) -> Dict[str, ProbeReport]:
    """Empirical constants of the two cutoff inequalities: the sqrt(R) bound
    on a truncated component and the Lipschitz bound on truncated
    differences, both over random multicomponent paths."""
    grid = GridSpec(n_modes, domain_length)
    interval = (0.0, horizon)
    results: Dict[str, List[List[float]]] = {"sqrt_r": [], "lipschitz": []}
    for refinement in refinements:
        rng = np.random.default_rng(seed)
        c1: List[float] = []
        c2: List[float] = []
        for _ in range(n_trials):
            paths_u = [
                random_spacetime_path(rng, grid, n_times, horizon, sym,
                                      refinement=refinement)
                for sym in COMPONENT_SYMBOLS
            ]
            eps = 10.0 ** rng.uniform(-2, 0)
            paths_v = []
            for p, sym in zip(paths_u, COMPONENT_SYMBOLS):
                pert = random_spacetime_path(rng, grid, n_times, horizon, sym,
                                             refinement=refinement)
                paths_v.append(SpaceTimePath(p.grid, p.times,
                                             p.values + eps * pert.values))
            specs = [NormSpec(si, b, sym, interval)
                     for si, sym in zip(s_indices, COMPONENT_SYMBOLS)]
            base = sum(
                xsb_norm_raw(p, si, b, sym, interval, rtol=None) ** 2
                for p, si, sym in zip(paths_u, s_indices, COMPONENT_SYMBOLS)
            )
            R = float(base * 10.0 ** rng.uniform(-1.5, 0.5))
            cut = CutoffSpec(max(R, 1e-12))
            theta_u = running_cutoff_series(paths_u, cut, specs)
            theta_v = running_cutoff_series(paths_v, cut, specs)
            for j, (p, si, sym) in enumerate(
                zip(paths_u, s_indices, COMPONENT_SYMBOLS)
            ):
                trunc = SpaceTimePath(p.grid, p.times,
                                      theta_u[:, None] * p.values)
                c1.append(
                    xsb_norm_raw(trunc, si, b, sym, interval, rtol=None)
                    / np.sqrt(cut.R)
                )
            denom = sum(
                xsb_norm_raw(
                    SpaceTimePath(pu.grid, pu.times, pu.values - pv.values),
                    si, b, sym, interval, rtol=None)
                for pu, pv, si, sym in
                zip(paths_u, paths_v, s_indices, COMPONENT_SYMBOLS)
            )
            num = max(
                xsb_norm_raw(
                    SpaceTimePath(
                        pu.grid, pu.times,
                        theta_u[:, None] * pu.values
                        - theta_v[:, None] * pv.values),
                    si, b, sym, interval, rtol=None)
                for pu, pv, si, sym in
                zip(paths_u, paths_v, s_indices, COMPONENT_SYMBOLS)
            )
            c2.append(num / denom if denom > 0 else 0.0)
        results["sqrt_r"].append(c1)
        results["lipschitz"].append(c2)

    out: Dict[str, ProbeReport] = {}
    for key, samples in results.items():
        base = np.asarray(samples[0])
        out[key] = ProbeReport(
            estimate_id="cutoff_" + key,
            parameters={"b": b, "n_modes": n_modes, "n_times": n_times,
                        "horizon": horizon, "seed": seed},
            n_trials=n_trials,
            max_ratio=float(np.max(base)),
            ratio_quantiles=[float(q) for q in
                             np.quantile(base, [0.5, 0.9, 1.0])],
            mesh_refinement_trend=[float(np.max(level)) for level in samples],
        )
    return out


# ---------------------------------------------------------------------------
# truncation-ladder growth monitors
# ---------------------------------------------------------------------------

@dataclass
class EnsembleStats:
    n_trajectories: int
    p_exponent: float
    mu_exponent: float
    charge_drift_stats: Dict[str, float]
    norm_growth_stats: Dict[str, Dict[str, float]]
    tau_R_histogram: Dict[str, List[float]]
    trend_slopes: Dict[str, float]
    n_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "p_exponent": self.p_exponent,
            "mu_exponent": self.mu_exponent,
            "charge_drift_stats": self.charge_drift_stats,
            "norm_growth_stats": self.norm_growth_stats,
            "tau_R_histogram": self.tau_R_histogram,
            "trend_slopes": self.trend_slopes,
            "n_failures": self.n_failures,
        }


def monitor_global_bounds(
    records_by_radius: Dict[float, Sequence[TrajectoryRecord]],
    r: float,
    b: float,
) -> EnsembleStats:
    """Growth statistics across a ladder of truncation radii: mean-square
    scalar norm and mean spinor norms per radius, with the slope of each
    statistic against log R (uniformity in R means slope near zero)."""
    if not (0.25 < r < 0.5):
        raise ValueError("r must lie in (1/4, 1/2)")
    if not (max(r, 1.0 - 2.0 * r) < b < 0.5):
        raise ValueError("b must lie in (max(r, 1-2r), 1/2)")
    p_exponent = max(4.0, (2 * b + 2 * r - 1) / (b + 2 * r - 1))
    mu_exponent = (0.5 - r) / b

    radii = sorted(records_by_radius)
    stats: Dict[str, Dict[str, float]] = {}
    tau_hist: Dict[str, List[float]] = {}
    drifts: List[float] = []
    n_traj = 0
    n_fail = 0
    per_radius = {"phi_plus_ms": [], "psi_plus_mean": [], "psi_minus_mean": []}
    for R in radii:
        phi_sq, psi_p, psi_m = [], [], []
        taus = []
        for rec in records_by_radius[R]:
            if isinstance(rec, SubintervalDivergence):
                n_fail += 1
                continue
            n_traj += 1
            cfg = rec.cfg
            interval = (0.0, cfg.horizon)
            path = [
                SpaceTimePath(cfg.grid, rec.times, rec.state_array[:, c, :])
                for c in range(3)
            ]
            psi_p.append(xsb_norm_raw(path[0], 0.0, b, PLUS_XI, interval,
                                      rtol=None))
            psi_m.append(xsb_norm_raw(path[1], 0.0, b, MINUS_XI, interval,
                                      rtol=None))
            phi_sq.append(
                xsb_norm_raw(path[2], r, b, PLUS_BRACKET_XI, interval,
                             rtol=None) ** 2
            )
            taus.append(rec.tau_R)
            drifts.append(
                float(np.max(np.abs(rec.charge - rec.charge[0]))
                      / max(rec.charge[0], 1e-300))
            )
        key = "R=%g" % R
        stats[key] = {
            "phi_plus_mean_square": float(np.mean(phi_sq)),
            "psi_plus_mean": float(np.mean(psi_p)),
            "psi_minus_mean": float(np.mean(psi_m)),
        }
        tau_hist[key] = [float(t) for t in taus]
        per_radius["phi_plus_ms"].append(float(np.mean(phi_sq)))
        per_radius["psi_plus_mean"].append(float(np.mean(psi_p)))
        per_radius["psi_minus_mean"].append(float(np.mean(psi_m)))

    logR = np.log(radii)
    slopes = {
        k: float(np.polyfit(logR, np.log(np.maximum(v, 1e-300)), 1)[0])
        if len(radii) > 1 else 0.0
        for k, v in per_radius.items()
    }
    return EnsembleStats(
        n_trajectories=n_traj,
        p_exponent=float(p_exponent),
        mu_exponent=float(mu_exponent),
        charge_drift_stats={
            "mean": float(np.mean(drifts)) if drifts else 0.0,
            "max": float(np.max(drifts)) if drifts else 0.0,
        },
        norm_growth_stats=stats,
        tau_R_histogram=tau_hist,
        trend_slopes=slopes,
        n_failures=n_fail,
    )


# ---------------------------------------------------------------------------
# Ito / Stratonovich weak consistency
# ---------------------------------------------------------------------------

def _phase_pair(grid: GridSpec, dt: float) -> np.ndarray:
    h = np.array([PLUS_XI.on_grid(grid), MINUS_XI.on_grid(grid)])
    return np.exp(-1j * dt * h)


def _linear_drift(u, M, MK1, include_ito_drift):
    out = np.empty_like(u)
    out[..., 0, :] = -1j * M * u[..., 1, :]
    out[..., 1, :] = -1j * M * u[..., 0, :]
    if include_ito_drift:
        out -= MK1 * u
    return out


def _noise_apply(u, zeta):
    # u has shape (..., 2, n_modes), zeta (..., n_modes)
    out = np.empty_like(u)
    out[..., 0, :] = 1j * u[..., 1, :] * zeta
    out[..., 1, :] = 1j * u[..., 0, :] * zeta
    return out


def _spectral_noise(grid, u, zeta_phys):
    phys = np.fft.ifft(u, axis=-1) / grid.dx
    return grid.dx * np.fft.fft(_noise_apply(phys, zeta_phys), axis=-1)


def ito_linear_batch(grid, k1, M, dt, n_steps, zeta, u0,
                     include_ito_drift=True, tol=1e-12):
    """Batched linear Dirac pair in Ito form with the conversion drift:
    exact group phases, trapezoidal drift solved per step by fixed-point
    sweeps, left-endpoint noise.  Mirrors the trajectory solver's one-step
    relation on a linear subsystem."""
    MK1 = ito_correction(k1)
    phase = _phase_pair(grid, dt)
    u = u0.copy()
    for n in range(n_steps):
        base = phase * (
            u + 0.5 * dt * _linear_drift(u, M, MK1, include_ito_drift)
            + _spectral_noise(grid, u, zeta[..., n, :])
        )
        new = base
        for _ in range(50):
            nxt = base + 0.5 * dt * _linear_drift(new, M, MK1, include_ito_drift)
            if np.max(np.abs(nxt - new)) < tol:
                new = nxt
                break
            new = nxt
        u = new
    return u


def stratonovich_heun_batch(grid, k1, M, dt, n_steps, zeta, u0):
    """Stratonovich reference: exact group phases with a Heun (midpoint
    average) correction of drift and noise coefficients."""
    phase = _phase_pair(grid, dt)
    u = u0.copy()
    for n in range(n_steps):
        z = zeta[..., n, :]
        fu = dt * _linear_drift(u, M, 0.0, False) + _spectral_noise(grid, u, z)
        pred = phase * (u + fu)
        fp = dt * _linear_drift(pred, M, 0.0, False) \
            + _spectral_noise(grid, pred, z)
        u = phase * (u + 0.5 * fu) + 0.5 * fp
    return u


def _batch_charge(grid, u):
    return (np.abs(u) ** 2).sum(axis=(-2, -1)) * grid.mode_weight


def ito_stratonovich_consistency(
    grid: GridSpec,
    kernel1: NoiseKernel,
    psi0: np.ndarray,
    n_trajectories: int,
    dt_exponents: Sequence[int] = (5, 6, 7, 8),
    horizon: float = 1.0,
    dirac_mass: float = 0.0,
    base_seed: int = 0,
    omit_drift: bool = False,
    chunk: int = 64,
) -> dict:
    """Weak discrepancy between the Ito form (with the conversion drift) and
    a Heun Stratonovich reference on the linear spinor subsystem, sharing
    increments between the two arms and refining the same Brownian paths
    across dt levels.  Returns per-level discrepancies and the fitted order.
    """
    dt_exponents = sorted(dt_exponents)
    finest = max(dt_exponents)
    n_fine = int(round(horizon * 2**finest))
    levels = {e: {"ito": 0.0, "strat": 0.0} for e in dt_exponents}
    ks = kernel1.kernel.to_physical().real
    k_hat = np.fft.fft(ks)
    done = 0
    while done < n_trajectories:
        m = min(chunk, n_trajectories - done)
        incs = np.empty((m, grid.n_modes, n_fine))
        for i in range(m):
            w = sample_increments(base_seed + done + i, grid.n_modes,
                                  n_fine, horizon / n_fine)
            incs[i] = w.increments
        for e in dt_exponents:
            n_steps = int(round(horizon * 2**e))
            dt = horizon / n_steps
            agg = incs.reshape(m, grid.n_modes, n_steps,
                               n_fine // n_steps).sum(axis=3)
            zeta = np.sqrt(grid.dx) * np.fft.ifft(
                k_hat[None, :, None] * np.fft.fft(agg, axis=1), axis=1
            ).real
            zeta = np.transpose(zeta, (0, 2, 1))     # (m, n_steps, n_modes)
            u0 = np.broadcast_to(psi0, (m,) + psi0.shape).copy()
            u_ito = ito_linear_batch(grid, kernel1, dirac_mass, dt, n_steps,
                                     zeta, u0,
                                     include_ito_drift=not omit_drift)
            u_str = stratonovich_heun_batch(grid, kernel1, dirac_mass, dt,
                                            n_steps, zeta, u0)
            levels[e]["ito"] += float(np.sum(_batch_charge(grid, u_ito)))
            levels[e]["strat"] += float(np.sum(_batch_charge(grid, u_str)))
        done += m

    discrepancies = {
        e: abs(levels[e]["ito"] - levels[e]["strat"]) / n_trajectories
        for e in dt_exponents
    }
    vals = np.array([discrepancies[e] for e in dt_exponents])
    if np.all(vals > 0):
        order = float(np.polyfit([-e for e in dt_exponents], np.log2(vals), 1)[0])
    else:
        order = np.inf
    return {
        "dt_exponents": list(dt_exponents),
        "discrepancies": {str(e): discrepancies[e] for e in dt_exponents},
        "order": order,
        "omit_drift": omit_drift,
        "n_trajectories": n_trajectories,
    }
