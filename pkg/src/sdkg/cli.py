"""Command-line driver: flat key=value configs, simulation / ensemble /
probe / check commands, CSV and JSONL outputs with reproducibility headers.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .bourgain import SpaceTimePath, hb_norm_sharp_cutoff, modified_norm, NormSpec
from .dynamics import SolverConfig, SubintervalDivergence, solve_trajectory
from .estimates import (
    ito_stratonovich_consistency,
    probe_bilinear,
    PROBE_IDS,
)
from .grid import GridSpec, SpectralField, sobolev_norm
from .model import COMPONENT_SYMBOLS, group_apply
from .noise import (
    NoiseKernel,
    coarsen_increments,
    gaussian_kernel,
    kernel_from_csv,
    sample_increments,
    sinc_kernel,
    zero_kernel,
)
from .presets import gaussian_wavepacket_state, single_mode_state, state_from_csv

COMMANDS = ("simulate", "ensemble", "probe-bilinear", "check-norms",
            "check-ito", "check-charge")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUN = 2
EXIT_IO = 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    n_modes: int = 256
    domain_length: float = 32.0 * np.pi
    dt: float = 2.0**-8
    horizon: float = 1.0
    subinterval_length: Optional[float] = None   # default 8 * dt
    truncation_radius: float = 16.0
    picard_tol: float = 1e-10
    picard_max_iters: int = 40
    dirac_mass: float = 0.0
    kg_mass: float = 1.0
    s: float = 0.0
    r: float = 1.0 / 3.0
    b: float = 0.3
    regulariser_mu: Optional[float] = None
    seed: int = 0
    base_seed: int = 0
    n_trajectories: int = 4
    n_basis: Optional[int] = None
    nonlinearity: str = "on"
    kg_component: str = "on"
    kernel1: str = "gaussian:width=1.0,scale=0.5"
    kernel2: str = "gaussian:width=1.5,scale=0.375"
    initial_data: str = "gaussian-wavepacket:width=2.0,shift=1.0,amplitude=0.05"
    output_format: str = "csv"
    output_path: str = "sdkg_out"
    probe_estimate: str = "kg_source"
    probe_trials: int = 200
    probe_n_times: int = 64
    probe_n_modes: int = 64
    ito_dt_exponents: str = "5,6,7,8"
    ito_trajectories: int = 512
    ito_fault: str = "off"
    charge_dt_exponents: str = "8,9,10"
    charge_seeds: int = 12

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append("%s = %s" % (f.name, "none" if v is None else repr(v)
                                      if isinstance(v, float) else str(v)))
        return "\n".join(lines) + "\n"


_BOOLISH = {"on", "off"}


def _parse_scalar(name, raw, kind, errors):
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        return raw
    except ValueError:
        errors.append("%s: cannot parse %r as %s" % (name, raw, kind.__name__))
        return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat key = value document.  Raises ValueError
    listing every violation with the offending field name."""
    cfg = RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    optional_floats = {"subinterval_length", "regulariser_mu"}
    optional_ints = {"n_basis"}
    errors = []
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append("line %d: expected 'key = value'" % ln)
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            errors.append("%s: unknown key" % key)
            continue
        if key in optional_floats:
            setattr(cfg, key, None if raw.lower() == "none"
                    else _parse_scalar(key, raw, float, errors))
        elif key in optional_ints:
            setattr(cfg, key, None if raw.lower() == "none"
                    else _parse_scalar(key, raw, int, errors))
        else:
            default = known[key].default
            kind = type(default) if default is not None else str
            setattr(cfg, key, _parse_scalar(key, raw, kind, errors))

    # field-named validation
    if cfg.n_modes < 8 or cfg.n_modes % 2:
        errors.append("n_modes must be an even integer >= 8")
    if cfg.domain_length <= 0:
        errors.append("domain_length must be positive")
    if cfg.dt <= 0:
        errors.append("dt must be positive")
    if cfg.horizon <= 0:
        errors.append("horizon must be positive")
    if not 0 < cfg.b < 0.5:
        errors.append("b must lie in (0, 1/2)")
    if cfg.kg_mass != 1.0:
        errors.append("kg_mass must equal 1 (fixed by rescaling)")
    if cfg.dirac_mass < 0:
        errors.append("dirac_mass must be nonnegative")
    delta = cfg.subinterval_length if cfg.subinterval_length is not None \
        else 8.0 * cfg.dt
    ratio = delta / cfg.dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        errors.append("subinterval_length must be an integer multiple of dt")
    nsub = cfg.horizon / delta
    if abs(nsub - round(nsub)) > 1e-9 or round(nsub) < 1:
        errors.append("horizon must be an integer multiple of subinterval_length")
    if cfg.truncation_radius <= 0:
        errors.append("truncation_radius must be positive")
    if cfg.picard_tol <= 0:
        errors.append("picard_tol must be positive")
    if cfg.picard_max_iters < 1:
        errors.append("picard_max_iters must be >= 1")
    if cfg.regulariser_mu is not None and cfg.regulariser_mu < 1:
        errors.append("regulariser_mu must be >= 1")
    if cfg.nonlinearity not in _BOOLISH:
        errors.append("nonlinearity must be 'on' or 'off'")
    if cfg.kg_component not in _BOOLISH:
        errors.append("kg_component must be 'on' or 'off'")
    if cfg.output_format not in ("csv", "jsonl"):
        errors.append("output_format must be 'csv' or 'jsonl'")
    if cfg.probe_estimate not in PROBE_IDS:
        errors.append("probe_estimate must be one of %s" % (PROBE_IDS,))
    if cfg.n_trajectories < 1:
        errors.append("n_trajectories must be >= 1")
    if cfg.ito_fault not in _BOOLISH:
        errors.append("ito_fault must be 'on' or 'off'")
    for key in ("ito_dt_exponents", "charge_dt_exponents"):
        try:
            exps = [int(tok) for tok in getattr(cfg, key).split(",")]
            if not exps:
                raise ValueError
        except ValueError:
            errors.append("%s must be a comma-separated list of integers" % key)
    if errors:
        raise ValueError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def _build_kernel(spec: str, grid: GridSpec) -> NoiseKernel:
    kind, _, rest = spec.partition(":")
    params = {}
    if rest:
        for tok in rest.split(","):
            k, _, v = tok.partition("=")
            params[k.strip()] = v.strip()
    if kind == "zero":
        return zero_kernel(grid)
    if kind == "gaussian":
        return gaussian_kernel(grid, float(params.get("width", 1.0)),
                               float(params.get("scale", 1.0)))
    if kind == "sinc":
        return sinc_kernel(grid, float(params.get("cutoff", 4.0)),
                           float(params.get("scale", 1.0)))
    if kind == "file":
        return kernel_from_csv(rest, grid)
    raise ValueError("kernel1/kernel2: unknown kernel kind %r" % kind)


def _build_state(spec: str, grid: GridSpec, dirac_mass: float):
    kind, _, rest = spec.partition(":")
    params = {}
    if rest and kind != "file":
        for tok in rest.split(","):
            k, _, v = tok.partition("=")
            params[k.strip()] = v.strip()
    if kind == "gaussian-wavepacket":
        return gaussian_wavepacket_state(
            grid,
            center=float(params["center"]) if "center" in params else None,
            width=float(params.get("width", 2.0)),
            shift=float(params.get("shift", 1.0)),
            amplitude=float(params.get("amplitude", 0.05)),
            dirac_mass=dirac_mass,
            band_limit=float(params["band_limit"]) if "band_limit" in params
            else None,
        )
    if kind == "single-mode":
        return single_mode_state(grid, int(params.get("k", 1)),
                                 float(params.get("amplitude", 1.0)),
                                 dirac_mass=dirac_mass)
    if kind == "file":
        return state_from_csv(rest, grid, dirac_mass=dirac_mass)
    raise ValueError("initial_data: unknown preset %r" % kind)


def solver_config(cfg: RunConfig, seed: Optional[int] = None) -> SolverConfig:
    grid = GridSpec(cfg.n_modes, cfg.domain_length)
    return SolverConfig(
        grid=grid,
        dt=cfg.dt,
        horizon=cfg.horizon,
        kernel1=_build_kernel(cfg.kernel1, grid),
        kernel2=_build_kernel(cfg.kernel2, grid),
        subinterval_length=cfg.subinterval_length,
        truncation_radius=cfg.truncation_radius,
        picard_tol=cfg.picard_tol,
        picard_max_iters=cfg.picard_max_iters,
        dirac_mass=cfg.dirac_mass,
        kg_mass=cfg.kg_mass,
        s_index=cfg.s,
        r_index=cfg.r,
        b_index=cfg.b,
        regulariser_mu=cfg.regulariser_mu,
        seed=cfg.seed if seed is None else seed,
        n_basis=cfg.n_basis,
        nonlinearity_on=cfg.nonlinearity == "on",
        kg_component_on=cfg.kg_component == "on",
    )


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

ROW_COLUMNS = (
    "seed", "time", "charge", "cutoff_value",
    "xnorm_sq_psi_plus", "xnorm_sq_psi_minus", "xnorm_sq_phi_plus",
    "hs_norm_psi_plus", "hs_norm_psi_minus", "hr_norm_phi_plus",
    "tau_flag",
)


def _record_rows(record, cfg: RunConfig):
    g = record.cfg.grid
    rows = []
    for i, t in enumerate(record.times):
        comps = record.state_array[i]
        hs = [
            float(np.sqrt(np.sum(g.bracket ** (2 * si) * np.abs(comps[c]) ** 2)
                          * g.mode_weight))
            for c, si in enumerate((cfg.s, cfg.s, cfg.r))
        ]
        rows.append((
            record.seed, float(t), float(record.charge[i]),
            float(record.cutoff_value[i]),
            float(record.running_norms[i, 0]),
            float(record.running_norms[i, 1]),
            float(record.running_norms[i, 2]),
            hs[0], hs[1], hs[2],
            int(record.tau_R < record.cfg.horizon and t >= record.tau_R),
        ))
    return rows


def _format_value(v):
    return repr(v) if isinstance(v, float) else str(v)


def _write_rows(path: str, cfg: RunConfig, command: str, rows) -> None:
    try:
        with open(path, "w") as fh:
            if cfg.output_format == "csv":
                fh.write("# command = %s\n" % command)
                for line in cfg.to_text().splitlines():
                    fh.write("# %s\n" % line)
                fh.write(",".join(ROW_COLUMNS) + "\n")
                for row in rows:
                    fh.write(",".join(_format_value(v) for v in row) + "\n")
            else:
                fh.write(json.dumps({"type": "config", "command": command,
                                     "config": cfg.to_text()}) + "\n")
                for row in rows:
                    fh.write(json.dumps(
                        {"type": "row", **dict(zip(ROW_COLUMNS, row))}) + "\n")
    except OSError as exc:
        raise IOError("cannot write output file %r: %s" % (path, exc))


def _write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IOError("cannot write output file %r: %s" % (path, exc))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _one_trajectory(args):
    text, seed = args
    cfg = parse_config(text)
    scfg = solver_config(cfg, seed=seed)
    state = _build_state(cfg.initial_data, scfg.grid, cfg.dirac_mass)
    record = solve_trajectory(scfg, state)
    summary = {
        "seed": seed,
        "final_charge_drift": float(
            abs(record.charge[-1] - record.charge[0])
            / max(record.charge[0], 1e-300)),
        "tau_R": float(record.tau_R),
        "max_iterations": max(r.iterations for r in record.picard_reports),
    }
    return _record_rows(record, cfg), summary


def cmd_simulate(cfg: RunConfig, output: str) -> int:
    rows, summary = _one_trajectory((cfg.to_text(), cfg.seed))
    _write_rows(output, cfg, "simulate", rows)
    print("simulate: charge drift %.3e, tau_R %.6g, max picard iterations %d"
          % (summary["final_charge_drift"], summary["tau_R"],
             summary["max_iterations"]))
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig, output: str, jobs: int) -> int:
    tasks = [(cfg.to_text(), cfg.base_seed + i)
             for i in range(cfg.n_trajectories)]
    if jobs > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            results = pool.map(_one_trajectory, tasks)
    else:
        results = [_one_trajectory(t) for t in tasks]
    rows = [row for block, _ in results for row in block]
    _write_rows(output, cfg, "ensemble", rows)
    drifts = [s["final_charge_drift"] for _, s in results]
    print("ensemble: %d trajectories, mean charge drift %.3e, "
          "min tau_R %.6g, max picard iterations %d"
          % (len(results), float(np.mean(drifts)),
             min(s["tau_R"] for _, s in results),
             max(s["max_iterations"] for _, s in results)))
    return EXIT_OK


def cmd_probe_bilinear(cfg: RunConfig, output: str, force: bool) -> int:
    report = probe_bilinear(
        cfg.probe_estimate, cfg.s, cfg.r, cfg.b, cfg.probe_trials,
        seed=cfg.base_seed, n_modes=cfg.probe_n_modes,
        n_times=cfg.probe_n_times, horizon=cfg.horizon, force=force,
    )
    _write_json(output, report.to_dict())
    trend = report.mesh_refinement_trend
    stable = (max(trend) - min(trend)) / max(trend) if max(trend) > 0 else 0.0
    print("probe-bilinear[%s]: max ratio %.4g, mesh variation %.1f%%"
          % (report.estimate_id, report.max_ratio, 100 * stable))
    return EXIT_OK


def cmd_check_norms(cfg: RunConfig, output: str) -> int:
    grid = GridSpec(64, cfg.domain_length)
    rng = np.random.default_rng(cfg.base_seed)
    worst = 0.0
    for trial in range(20):
        b = (0.1, 0.3, 0.45)[trial % 3]
        T = 2.0 ** -float(rng.integers(0, 4))
        n_t = 32
        f = SpectralField(
            grid, (rng.standard_normal(64) + 1j * rng.standard_normal(64))
            / grid.bracket**2)
        sym = COMPONENT_SYMBOLS[trial % 3]
        times = np.linspace(0.0, T, n_t + 1)
        slices = np.array([group_apply(sym, t, f).coeffs for t in times])
        path = SpaceTimePath(grid, times, slices)
        val = modified_norm(path, NormSpec(cfg.s, b, sym, (0.0, T)))
        ref = T ** (0.5 - b) * sobolev_norm(f, cfg.s)
        worst = max(worst, abs(val - ref) / ref)
    free_ok = worst < 1e-10

    ratios = []
    for T in [2.0**-k for k in range(2, 9)]:
        val = hb_norm_sharp_cutoff(np.ones(128), 0.3, dt=T / 128)
        ratios.append(val / T ** (0.5 - 0.3))
    bracket = max(ratios) / min(ratios)
    scaling_ok = bracket < 3.0

    payload = {
        "free_evolution_identity_max_rel_error": worst,
        "free_evolution_identity_ok": bool(free_ok),
        "indicator_scaling_bracket": bracket,
        "indicator_scaling_ok": bool(scaling_ok),
    }
    _write_json(output, payload)
    print("check-norms: identity error %.3e, scaling bracket %.3f"
          % (worst, bracket))
    return EXIT_OK if (free_ok and scaling_ok) else EXIT_RUN


def cmd_check_ito(cfg: RunConfig, output: str) -> int:
    grid = GridSpec(cfg.probe_n_modes, cfg.domain_length / 2.0)
    kernel1 = _build_kernel(cfg.kernel1, grid)
    state = _build_state(cfg.initial_data, grid, cfg.dirac_mass)
    psi0 = np.array([state.psi_plus.coeffs, state.psi_minus.coeffs])
    exps = [int(t) for t in cfg.ito_dt_exponents.split(",")]
    result = ito_stratonovich_consistency(
        grid, kernel1, psi0, cfg.ito_trajectories, dt_exponents=exps,
        horizon=cfg.horizon, dirac_mass=cfg.dirac_mass,
        base_seed=cfg.base_seed, omit_drift=cfg.ito_fault == "on",
    )
    _write_json(output, result)
    zero_noise = kernel1.l2_norm() == 0.0
    discs = [result["discrepancies"][str(e)] for e in sorted(exps)]
    print("check-ito: discrepancies %s, order %.3f"
          % (["%.3e" % d for d in discs], result["order"]))
    if zero_noise:
        return EXIT_OK if max(discs) == 0.0 else EXIT_RUN
    if cfg.ito_fault == "on":
        return EXIT_OK  # fault runs are informational
    return EXIT_OK if result["order"] >= 0.5 else EXIT_RUN


def cmd_check_charge(cfg: RunConfig, output: str) -> int:
    exps = sorted(int(t) for t in cfg.charge_dt_exponents.split(","))
    finest = max(exps)
    grid = GridSpec(cfg.n_modes, cfg.domain_length)
    state = _build_state(cfg.initial_data, grid, cfg.dirac_mass)
    n_fine = int(round(cfg.horizon * 2**finest))

    noisy_means = []
    for use_noise in (True, False):
        per_level = {e: [] for e in exps}
        seeds = range(cfg.base_seed, cfg.base_seed + cfg.charge_seeds)
        for seed in seeds if use_noise else [cfg.base_seed]:
            inc_fine = sample_increments(seed, grid.n_modes, n_fine,
                                         cfg.horizon / n_fine)
            for e in exps:
                n_steps = int(round(cfg.horizon * 2**e))
                scfg = solver_config(cfg, seed=seed)
                scfg = SolverConfig(
                    grid=grid, dt=cfg.horizon / n_steps, horizon=cfg.horizon,
                    kernel1=scfg.kernel1 if use_noise else None,
                    kernel2=scfg.kernel2 if use_noise else None,
                    truncation_radius=cfg.truncation_radius,
                    picard_tol=cfg.picard_tol,
                    picard_max_iters=cfg.picard_max_iters,
                    dirac_mass=cfg.dirac_mass, s_index=cfg.s, r_index=cfg.r,
                    b_index=cfg.b, seed=seed,
                )
                inc = coarsen_increments(inc_fine, n_fine // n_steps) \
                    if use_noise else None
                rec = solve_trajectory(scfg, state, inc)
                per_level[e].append(
                    float(np.max(np.abs(rec.charge - rec.charge[0]))
                          / max(rec.charge[0], 1e-300)))
        means = [float(np.mean(per_level[e])) for e in exps]
        if use_noise:
            noisy_means = means
            order = float(np.polyfit([-e for e in exps], np.log2(means), 1)[0])
        else:
            off_max = max(means)
    payload = {
        "dt_exponents": exps,
        "noise_on_mean_drifts": noisy_means,
        "noise_on_order": order,
        "noise_off_max_drift": off_max,
    }
    _write_json(output, payload)
    print("check-charge: noise-on order %.3f, noise-off max drift %.3e"
          % (order, off_max))
    return EXIT_OK if (order >= 0.5 and off_max < 1e-9) else EXIT_RUN


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(command: str, cfg: RunConfig, output: Optional[str] = None,
        jobs: int = 1, force: bool = False) -> int:
    out = output if output is not None else cfg.output_path
    if command == "simulate":
        return cmd_simulate(cfg, out)
    if command == "ensemble":
        return cmd_ensemble(cfg, out, jobs)
    if command == "probe-bilinear":
        return cmd_probe_bilinear(cfg, out, force)
    if command == "check-norms":
        return cmd_check_norms(cfg, out)
    if command == "check-ito":
        return cmd_check_ito(cfg, out)
    if command == "check-charge":
        return cmd_check_charge(cfg, out)
    raise ValueError("unknown command %r" % command)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sdkg",
        description="Pseudospectral simulator and diagnostics for a coupled "
                    "spinor/scalar system with multiplicative noise.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="key = value file")
    parser.add_argument("--output", default=None)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--force", action="store_true",
                        help="run probes outside the admissible index range")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print("cannot read config file %r: %s" % (args.config, exc),
              file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.command, cfg, args.output, args.jobs, args.force)
    except SubintervalDivergence as exc:
        print("run aborted: %s" % exc, file=sys.stderr)
        return EXIT_RUN
    except IOError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
