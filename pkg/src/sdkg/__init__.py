"""Pseudospectral simulator and diagnostic suite for a one-dimensional
coupled spinor/scalar dispersive system with homogeneous multiplicative
noise, built on split mild equations, truncated Picard iteration and
dispersive space-time norms."""

from .grid import (
    GridSpec,
    SpectralField,
    dealias,
    forward_transform,
    inverse_transform,
    l2_norm_physical,
    sobolev_norm,
)
from .model import (
    COMPONENT_SYMBOLS,
    MINUS_BRACKET_XI,
    MINUS_XI,
    PLUS_BRACKET_XI,
    PLUS_XI,
    DispersionSymbol,
    SplitState,
    duhamel,
    group_apply,
    split,
    unsplit,
)
from .noise import (
    CellBasis,
    NoiseKernel,
    WienerIncrements,
    coarsen_increments,
    convolve,
    gaussian_kernel,
    hs_norm_multiplication,
    ito_correction,
    kernel_from_csv,
    kernel_to_csv,
    noise_increment_dirac,
    noise_increment_kg,
    sample_increments,
    sinc_kernel,
    zero_kernel,
)
from .bourgain import (
    CutoffSpec,
    NormSpec,
    SpaceTimePath,
    hb_norm_sharp_cutoff,
    modified_norm,
    running_cutoff_series,
    slobodeckij_seminorm,
    stopping_time,
    theta_cutoff,
    theta_profile,
    theta_state_cutoff,
    xsb_norm,
    xsb_norm_raw,
)
from .dynamics import (
    PicardReport,
    SolverConfig,
    SubintervalDivergence,
    TrajectoryRecord,
    bilinear_dirac,
    bilinear_kg,
    mild_residual,
    picard_solve_subinterval,
    regularize,
    solve_trajectory,
)
from .estimates import (
    EnsembleStats,
    ProbeReport,
    charge,
    ito_stratonovich_consistency,
    monitor_global_bounds,
    probe_bilinear,
    probe_cutoff_bounds,
    random_spacetime_path,
)
from .presets import gaussian_wavepacket_state, single_mode_state, state_from_csv

__version__ = "0.1.0"
