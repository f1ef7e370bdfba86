"""Truncated mild dynamics of the split system: bilinear couplings, the
frequency regulariser, Picard iteration on subintervals and trajectory
assembly.

The mild map uses exact group phases with trapezoidal quadrature for the
drift integrals and left-endpoint (Ito) sums for the stochastic integral.
The nonlinearity is damped by the smooth cutoff of the running modified
norms; the Ito-correction drift and the mass coupling stay untruncated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bourgain import (
    CutoffSpec,
    RunningModifiedNorm,
    theta_cutoff,
    theta_profile,
    stopping_time,
)
from .grid import GridSpec, SpectralField, require_same_grid
from .model import COMPONENT_SYMBOLS, SplitState
from .noise import (
    CellBasis,
    NoiseKernel,
    WienerIncrements,
    ito_correction,
    sample_increments,
    zero_kernel,
)


class SubintervalDivergence(RuntimeError):
    """Picard iteration failed to contract on one subinterval."""

    def __init__(self, start_index: int, residuals: Sequence[float]):
        self.start_index = start_index
        self.residuals = list(residuals)
        super().__init__(
            "no contraction on subinterval starting at step %d "
            "(residuals %s)" % (start_index, self.residuals)
        )


# ---------------------------------------------------------------------------
# bilinear couplings and the frequency regulariser
# ---------------------------------------------------------------------------

def _dirac_product_arr(grid: GridSpec, phi_plus: np.ndarray, psi: np.ndarray,
                       mask: np.ndarray) -> np.ndarray:
    phi_phys = 2.0 * (np.fft.ifft(phi_plus) / grid.dx).real
    psi_phys = np.fft.ifft(psi) / grid.dx
    return grid.dx * np.fft.fft(phi_phys * psi_phys) * mask


def _kg_product_arr(grid: GridSpec, psi_plus: np.ndarray, psi_minus: np.ndarray,
                    mask: np.ndarray) -> np.ndarray:
    pp = np.fft.ifft(psi_plus) / grid.dx
    pm = np.fft.ifft(psi_minus) / grid.dx
    src = (np.conj(pp) * pm).real
    return grid.dx * np.fft.fft(src) * mask / grid.bracket


def bilinear_dirac(phi_plus: SpectralField, psi: SpectralField) -> SpectralField:
    """Real scalar field times spinor component: reconstruct phi = 2 Re(phi_plus)
    in physical space, multiply pointwise, dealias."""
    require_same_grid(phi_plus.grid, psi.grid)
    g = phi_plus.grid
    return SpectralField(
        g, _dirac_product_arr(g, phi_plus.coeffs, psi.coeffs, g.dealias_mask())
    )


def bilinear_kg(psi_plus: SpectralField, psi_minus: SpectralField) -> SpectralField:
    """Spinor density source: <D>^{-1} Re(conj(psi_plus) psi_minus), dealiased."""
    require_same_grid(psi_plus.grid, psi_minus.grid)
    g = psi_plus.grid
    return SpectralField(
        g, _kg_product_arr(g, psi_plus.coeffs, psi_minus.coeffs, g.dealias_mask())
    )


def regularizer_multiplier(grid: GridSpec, mu: float) -> np.ndarray:
    if mu < 1:
        raise ValueError("regulariser scale mu must be >= 1")
    return theta_profile(grid.frequencies / mu)


def regularize(f: SpectralField, mu: float) -> SpectralField:
    """Smooth frequency truncation at scale mu: multiply mode xi by
    theta(xi/mu).  Identity on |xi| <= mu, zero beyond 2 mu, norm <= 1."""
    return SpectralField(f.grid, f.coeffs * regularizer_multiplier(f.grid, mu))


# ---------------------------------------------------------------------------
# solver configuration and records
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    grid: GridSpec
    dt: float
    horizon: float
    kernel1: NoiseKernel = None
    kernel2: NoiseKernel = None
    subinterval_length: float = None
    truncation_radius: float = 16.0
    picard_tol: float = 1e-10
    picard_max_iters: int = 40
    dirac_mass: float = 0.0
    kg_mass: float = 1.0
    s_index: float = 0.0
    r_index: float = 1.0 / 3.0
    b_index: float = 0.3
    regulariser_mu: Optional[float] = None
    seed: int = 0
    n_basis: Optional[int] = None
    nonlinearity_on: bool = True
    kg_component_on: bool = True

    def __post_init__(self):
        if self.kernel1 is None:
            self.kernel1 = zero_kernel(self.grid)
        if self.kernel2 is None:
            self.kernel2 = zero_kernel(self.grid)
        if self.subinterval_length is None:
            self.subinterval_length = 8.0 * self.dt
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if self.kg_mass != 1.0:
            raise ValueError("kg_mass is fixed to 1 by rescaling")
        if not 0 < self.b_index < 0.5:
            raise ValueError("b_index must lie in (0, 1/2)")
        if self.regulariser_mu is not None and self.regulariser_mu < 1:
            raise ValueError("regulariser_mu must be >= 1")
        self.steps_per_subinterval = int(round(self.subinterval_length / self.dt))
        if abs(self.steps_per_subinterval * self.dt - self.subinterval_length) \
                > 1e-9 * self.subinterval_length or self.steps_per_subinterval < 1:
            raise ValueError("subinterval_length must be a multiple of dt")
        self.n_subintervals = int(round(self.horizon / self.subinterval_length))
        if abs(self.n_subintervals * self.subinterval_length - self.horizon) \
                > 1e-9 * self.horizon or self.n_subintervals < 1:
            raise ValueError("horizon must be a multiple of subinterval_length")
        self.n_steps = self.steps_per_subinterval * self.n_subintervals

    @property
    def component_s_indices(self):
        return (self.s_index, self.s_index, self.r_index)


@dataclass
class PicardReport:
    start_index: int
    iterations: int
    residuals: List[float] = field(default_factory=list)

    @property
    def ratios(self) -> List[float]:
        r = self.residuals
        return [r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0]


@dataclass
class SubintervalSolution:
    times: np.ndarray
    states: np.ndarray  # (nodes, 3, n_modes)
    report: PicardReport


class TrajectoryRecord:
    """Time series produced by one noise realisation."""

    def __init__(self, cfg: SolverConfig, times, states, charge, cutoff_value,
                 running_norms, tau_R, picard_reports, seed):
        self.cfg = cfg
        self.times = times
        self.state_array = states            # (n_times, 3, n_modes)
        self.charge = charge
        self.cutoff_value = cutoff_value
        self.running_norms = running_norms   # (n_times, 3) squared norms
        self.tau_R = tau_R
        self.picard_reports = picard_reports
        self.seed = seed

    def state_at(self, index: int) -> SplitState:
        g = self.cfg.grid
        c = self.state_array[index]
        return SplitState(
            SpectralField(g, c[0].copy()),
            SpectralField(g, c[1].copy()),
            SpectralField(g, c[2].copy()),
            dirac_mass=self.cfg.dirac_mass,
            s_index=self.cfg.s_index,
            r_index=self.cfg.r_index,
        )

    @property
    def states(self) -> List[SplitState]:
        return [self.state_at(i) for i in range(self.times.size)]

    def picard_ratio_summary(self):
        ratios = [r for rep in self.picard_reports for r in rep.ratios]
        if not ratios:
            return {"count": 0, "max": 0.0, "median": 0.0}
        return {
            "count": len(ratios),
            "max": float(np.max(ratios)),
            "median": float(np.median(ratios)),
        }


# ---------------------------------------------------------------------------
# the mild stepper
# ---------------------------------------------------------------------------

class _MildStepper:
    """Shared precomputation plus the Picard sweep on one subinterval."""

    def __init__(self, cfg: SolverConfig, increments: WienerIncrements):
        self.cfg = cfg
        g = cfg.grid
        self.grid = g
        self.hvals = np.array([sym.on_grid(g) for sym in COMPONENT_SYMBOLS])
        J = cfg.steps_per_subinterval
        # phases[c, l] = exp(-i l dt h_c(xi))
        lgrid = np.arange(J + 1)[None, :, None]
        self.phases = np.exp(-1j * lgrid * cfg.dt * self.hvals[:, None, :])
        # quadrature tensors: trapezoid weights for the drift, left-endpoint
        # sums for the noise, combined with the propagation phases
        trap = np.zeros((J + 1, J + 1))
        ito = np.zeros((J + 1, J + 1))
        for l in range(1, J + 1):
            trap[l, : l + 1] = 1.0
            trap[l, 0] = trap[l, l] = 0.5
            ito[l, :l] = 1.0
        lag = np.maximum(np.arange(J + 1)[:, None] - np.arange(J + 1)[None, :], 0)
        prop = np.transpose(self.phases[:, lag, :], (1, 2, 0, 3))  # (l, j, c, n)
        self.trap_tensor = trap[:, :, None, None] * prop
        self.ito_tensor = ito[:, :J, None, None] * prop[:, :J]
        self.mask = g.dealias_mask().astype(float)
        self.M_K1 = ito_correction(cfg.kernel1)
        self.pmu = (
            regularizer_multiplier(g, cfg.regulariser_mu)
            if cfg.regulariser_mu is not None
            else None
        )
        self.noise1_on = cfg.kernel1.l2_norm() > 0.0
        self.noise2_on = cfg.kernel2.l2_norm() > 0.0 and cfg.kg_component_on
        basis = CellBasis(g, cfg.n_basis)
        self.zeta1 = self._smoothed_fields(cfg.kernel1, increments, basis) \
            if self.noise1_on else None
        self.zeta2 = self._smoothed_fields(cfg.kernel2, increments, basis) \
            if self.noise2_on else None
        self.running = RunningModifiedNorm(
            g, cfg.dt, cfg.b_index, cfg.component_s_indices, COMPONENT_SYMBOLS,
            capacity=cfg.n_steps + 1,
        )
        self.cutoff = CutoffSpec(cfg.truncation_radius)
        self.delta = cfg.subinterval_length

    @staticmethod
    def _smoothed_fields(kernel, increments, basis):
        g = basis.grid
        if basis.complete:
            ks = kernel.kernel.to_physical().real
            conv = np.fft.ifft(
                np.fft.fft(ks)[:, None] * np.fft.fft(increments.increments, axis=0),
                axis=0,
            ).real
            return np.sqrt(g.dx) * conv.T        # (n_steps, n_modes)
        return increments.increments.T @ basis.smoothed_members(kernel)

    # -- right-hand-side pieces ---------------------------------------------

    def project_state(self, u: np.ndarray) -> np.ndarray:
        out = u * self.mask[None, :]
        if self.pmu is not None:
            out = out * self.pmu[None, :]
        return out

    def _drift(self, u: np.ndarray, theta: float) -> np.ndarray:
        """Deterministic integrand at one node given the cutoff value there."""
        return self._drift_batch(u[None, :, :], np.array([theta]))[0]

    def _drift_batch(self, nodes: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Deterministic integrand at a block of nodes, shape (L, 3, n_modes)."""
        cfg = self.cfg
        g = self.grid
        u_in = nodes * self.pmu if self.pmu is not None else nodes
        psi_p, psi_m, phi_p = u_in[:, 0], u_in[:, 1], u_in[:, 2]
        out = np.zeros_like(nodes)
        out[:, 0] = -1j * cfg.dirac_mass * psi_m - self.M_K1 * psi_p
        out[:, 1] = -1j * cfg.dirac_mass * psi_p - self.M_K1 * psi_m
        if cfg.nonlinearity_on and np.any(theta > 0.0):
            th2 = (theta * theta)[:, None]
            phi_phys = 2.0 * (np.fft.ifft(phi_p, axis=1) / g.dx).real
            pp_phys = np.fft.ifft(psi_p, axis=1) / g.dx
            pm_phys = np.fft.ifft(psi_m, axis=1) / g.dx
            dm = g.dx * self.mask
            out[:, 0] += 1j * th2 * np.fft.fft(phi_phys * pm_phys, axis=1) * dm
            out[:, 1] += 1j * th2 * np.fft.fft(phi_phys * pp_phys, axis=1) * dm
            if cfg.kg_component_on:
                src = (np.conj(pp_phys) * pm_phys).real
                out[:, 2] = 1j * th2 * np.fft.fft(src, axis=1) * dm / g.bracket
        if self.pmu is not None:
            out *= self.pmu
        return out

    def _noise_batch(self, nodes: np.ndarray, start: int) -> np.ndarray:
        """Stochastic integrands of the cells starting at global index start,
        one per node, shape (L, 3, n_modes)."""
        g = self.grid
        L = nodes.shape[0]
        u_in = nodes * self.pmu if self.pmu is not None else nodes
        out = np.zeros_like(nodes)
        if self.noise1_on:
            z1 = self.zeta1[start:start + L]
            pp_phys = np.fft.ifft(u_in[:, 0], axis=1) / g.dx
            pm_phys = np.fft.ifft(u_in[:, 1], axis=1) / g.dx
            out[:, 0] = 1j * g.dx * np.fft.fft(pm_phys * z1, axis=1)
            out[:, 1] = 1j * g.dx * np.fft.fft(pp_phys * z1, axis=1)
        if self.noise2_on:
            z2 = self.zeta2[start:start + L]
            phi_phys = 2.0 * (np.fft.ifft(u_in[:, 2], axis=1) / g.dx).real
            out[:, 2] = 0.5j * g.dx * np.fft.fft(phi_phys * z2, axis=1) / g.bracket
        if self.pmu is not None:
            out *= self.pmu
        return out

    def _noise_term(self, u: np.ndarray, step: int) -> np.ndarray:
        """Stochastic integrand contracted with the increments of one cell."""
        return self._noise_batch(u[None, :, :], step)[0]

    # -- cutoff preview during sweeps ----------------------------------------

    def _preview_f(self, v: np.ndarray, m: int, times: np.ndarray) -> np.ndarray:
        """f(t) at the subinterval nodes, gluing the accepted history with the
        provisional iterate v (nodes 0..J; node 0 is the accepted slice)."""
        run = self.running
        J = v.shape[0] - 1
        b = run.b
        dt = run.dt
        f = np.zeros(J + 1)
        f[0] = run.value_sq(m, times[0]) if m > 0 else 0.0
        if J == 0:
            return f
        hist_q = m + 1  # cells 0..m are fixed (slice m = start node)
        n_prov = J - 1  # provisional cells m+1 .. m+J-1
        l2_new = np.zeros((run.n_comp, max(n_prov, 0)))
        dbl_new = np.zeros((run.n_comp, max(n_prov, 0)))
        prov_abs = m + 1 + np.arange(n_prov)
        for c in range(run.n_comp):
            if n_prov == 0:
                break
            rows = run.sweights[c][None, :] * np.exp(
                1j * times[1:J, None] * run.hvals[c][None, :]
            ) * v[1:J, c, :]
            nrm = np.sum(np.abs(rows) ** 2, axis=1)
            l2_new[c] = nrm
            hist = run.prof[c][:hist_q]
            inner = (rows @ hist.conj().T).real          # (n_prov, hist_q)
            d = nrm[:, None] + run.nrm[c][:hist_q][None, :] - 2.0 * inner
            gaps = prov_abs[:, None] - np.arange(hist_q)[None, :]
            w = d * run.ipow[gaps - 1]
            dbl_new[c] = np.sum(w, axis=1)
            # pairs inside the provisional block
            if n_prov > 1:
                gram = (rows @ rows.conj().T).real
                dd = nrm[:, None] + nrm[None, :] - 2.0 * gram
                pg = np.abs(prov_abs[:, None] - prov_abs[None, :])
                np.fill_diagonal(pg, 1)
                kern = run.ipow[pg - 1]
                np.fill_diagonal(kern, 0.0)
                # attribute each pair (i < j) to the later cell j
                contrib = np.tril(dd * kern, k=-1).sum(axis=1)
                dbl_new[c] += contrib
        for l in range(1, J + 1):
            t = times[l]
            n_use = min(l - 1, n_prov)  # provisional cells below t
            tot = 0.0
            for c in range(run.n_comp):
                l2 = run.l2cum[c][hist_q] + dt * np.sum(l2_new[c][:n_use])
                dbl = run.dblcum[c][hist_q] + 2.0 * dt**2 * np.sum(dbl_new[c][:n_use])
                tot += t ** (-2.0 * b) * l2 + dbl
            f[l] = tot
        return f

    def _difference_norm(self, dv: np.ndarray, times: np.ndarray) -> float:
        """Modified product norm of an iterate difference on the subinterval."""
        run = self.running
        J = dv.shape[0] - 1
        dt = run.dt
        length = times[-1] - times[0]
        total = 0.0
        for c in range(run.n_comp):
            rows = run.sweights[c][None, :] * np.exp(
                1j * times[:J, None] * run.hvals[c][None, :]
            ) * dv[:J, c, :]
            nrm = np.sum(np.abs(rows) ** 2, axis=1)
            total += length ** (-2.0 * run.b) * dt * np.sum(nrm)
            if J > 1:
                gram = (rows @ rows.conj().T).real
                dd = nrm[:, None] + nrm[None, :] - 2.0 * gram
                pg = np.abs(np.arange(J)[:, None] - np.arange(J)[None, :])
                np.fill_diagonal(pg, 1)
                kern = run.ipow[pg - 1]
                np.fill_diagonal(kern, 0.0)
                total += dt**2 * np.sum(dd * kern)
        return float(np.sqrt(total))

    # -- one subinterval ------------------------------------------------------

    def solve_subinterval(self, u_start: np.ndarray, m: int) -> SubintervalSolution:
        cfg = self.cfg
        J = cfg.steps_per_subinterval
        times = (m + np.arange(J + 1)) * cfg.dt
        free = np.einsum("cln,cn->lcn", self.phases, u_start)
        v = free.copy()
        report = PicardReport(start_index=m, iterations=0)
        noisy = self.noise1_on or self.noise2_on
        for it in range(cfg.picard_max_iters):
            f_nodes = self._preview_f(v, m, times)
            theta = theta_cutoff(f_nodes, self.cutoff)
            drift = self._drift_batch(v, theta)
            new_v = free + cfg.dt * np.einsum(
                "ljcn,jcn->lcn", self.trap_tensor, drift
            )
            if noisy:
                noise = self._noise_batch(v[:J], m)
                new_v += np.einsum("ljcn,jcn->lcn", self.ito_tensor, noise)
            resid = self._difference_norm(new_v - v, times)
            report.residuals.append(resid)
            report.iterations = it + 1
            v = new_v
            if resid < cfg.picard_tol:
                return SubintervalSolution(times, v, report)
        raise SubintervalDivergence(m, report.residuals)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _initial_array(cfg: SolverConfig, initial: SplitState) -> np.ndarray:
    require_same_grid(cfg.grid, initial.grid)
    return np.array(
        [initial.psi_plus.coeffs, initial.psi_minus.coeffs, initial.phi_plus.coeffs]
    )


def picard_solve_subinterval(
    prev_state: SplitState,
    history: Optional[TrajectoryRecord],
    increments: WienerIncrements,
    cfg: SolverConfig,
    start_index: int = 0,
) -> SubintervalSolution:
    """Solve the truncated mild system on one subinterval [S, S + delta].

    history carries the accepted path on (0, S) entering the running-norm
    cutoff; pass None when S = 0.  The returned path includes the node at S.
    """
    stepper = _MildStepper(cfg, increments)
    if history is not None:
        for q in range(start_index):
            stepper.running.append(history.times[q], history.state_array[q])
    u = _initial_array(cfg, prev_state)
    if history is None and start_index == 0:
        u = stepper.project_state(u)  # band-limit fresh initial data only
    stepper.running.append(start_index * cfg.dt, u)
    return stepper.solve_subinterval(u, start_index)


def solve_trajectory(
    cfg: SolverConfig,
    initial: SplitState,
    increments: Optional[WienerIncrements] = None,
) -> TrajectoryRecord:
    """March the truncated mild dynamics over [0, horizon], recording charge,
    cutoff values, running squared modified norms and the crossing time of
    the truncation radius."""
    if increments is None:
        K = cfg.n_basis if cfg.n_basis is not None else cfg.grid.n_modes
        increments = sample_increments(cfg.seed, K, cfg.n_steps, cfg.dt)
    elif increments.n_steps != cfg.n_steps or not np.isclose(
        increments.dt, cfg.dt, rtol=1e-12
    ):
        raise ValueError("increments do not match the solver time grid")

    stepper = _MildStepper(cfg, increments)
    n = cfg.n_steps
    times = cfg.dt * np.arange(n + 1)
    states = np.zeros((n + 1, 3, cfg.grid.n_modes), dtype=complex)
    charge = np.zeros(n + 1)
    cutoff_value = np.zeros(n + 1)
    running_norms = np.zeros((n + 1, 3))
    f_series = np.zeros(n + 1)
    reports: List[PicardReport] = []

    u = stepper.project_state(_initial_array(cfg, initial))
    states[0] = u
    charge[0] = _charge_arr(cfg.grid, u)
    stepper.running.append(0.0, u)
    cutoff_value[0] = 1.0

    J = cfg.steps_per_subinterval
    for k in range(cfg.n_subintervals):
        m = k * J
        sol = stepper.solve_subinterval(states[m], m)
        reports.append(sol.report)
        for l in range(1, J + 1):
            q = m + l
            states[q] = sol.states[l]
            stepper.running.append(times[q], states[q])
            for c in range(3):
                running_norms[q, c] = stepper.running.component_value_sq(
                    c, q, times[q]
                )
            f_series[q] = running_norms[q].sum()
            cutoff_value[q] = theta_cutoff(f_series[q], stepper.cutoff)
            charge[q] = _charge_arr(cfg.grid, states[q])

    tau = stopping_time(f_series, times, cfg.truncation_radius, cfg.horizon)
    return TrajectoryRecord(cfg, times, states, charge, cutoff_value,
                            running_norms, tau, reports, increments.seed)


def _charge_arr(grid: GridSpec, u: np.ndarray) -> float:
    return float(
        (np.sum(np.abs(u[0]) ** 2) + np.sum(np.abs(u[1]) ** 2)) * grid.mode_weight
    )


def mild_residual(
    record: TrajectoryRecord,
    cfg: SolverConfig,
    increments: WienerIncrements,
) -> float:
    """Defect between the stored path and the right-hand side of the
    truncated mild equations recomputed from it: max over grid times of the
    H^s (spinor) / H^r (scalar) norms of the difference."""
    stepper = _MildStepper(cfg, increments)
    n = cfg.n_steps
    times = record.times
    states = record.state_array
    # cutoff values recomputed from the stored path
    for q in range(n + 1):
        stepper.running.append(times[q], states[q])
    f = np.zeros(n + 1)
    for q in range(1, n + 1):
        f[q] = stepper.running.value_sq(q, times[q])
    theta = theta_cutoff(f, stepper.cutoff)

    drift = np.array([stepper._drift(states[q], theta[q]) for q in range(n + 1)])
    noisy = stepper.noise1_on or stepper.noise2_on
    noise = np.array([stepper._noise_term(states[q], q) for q in range(n)]) \
        if noisy else None

    g = cfg.grid
    pow_phase = np.exp(
        -1j * np.arange(n + 1)[None, :, None] * cfg.dt * stepper.hvals[:, None, :]
    )
    u0 = states[0]
    weights = [g.bracket ** (2 * s) * g.mode_weight for s in cfg.component_s_indices]
    worst = 0.0
    for q in range(n + 1):
        rhs = pow_phase[:, q, :] * u0
        if q > 0:
            acc = 0.5 * pow_phase[:, q, :] * drift[0] + 0.5 * drift[q]
            for j in range(1, q):
                acc = acc + pow_phase[:, q - j, :] * drift[j]
            rhs = rhs + cfg.dt * acc
            if noisy:
                for j in range(q):
                    rhs = rhs + pow_phase[:, q - j, :] * noise[j]
        diff = states[q] - rhs
        for c in range(3):
            err = np.sqrt(np.sum(weights[c] * np.abs(diff[c]) ** 2))
            worst = max(worst, float(err))
    return worst
