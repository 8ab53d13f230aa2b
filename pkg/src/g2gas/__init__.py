"""Second-order photon correlations of a pump beam after a thermal two-level gas."""

from .atomic_steady import SteadyState, diffusion_matrix, saturation, steady_state
from .correlation import CorrelationResult, G2Map, g2_normalized, g2_zero, g2_zero_map
from .medium import MediumParams, OpenRates, alpha, voigt_hwhm
from .solver import (
    AntibunchingPoint,
    NoRootError,
    g2_floor_open,
    solve_detuned_branch,
    solve_od_a_asymptotic,
    solve_od_a_resonant,
)
from .specfun import ConvergenceError
from .spectra import psi_b_zero, psi_s_zero
from .sweep import SweepResult, SweepSpec, run_sweep

__version__ = "1.0.0"

__all__ = [
    "AntibunchingPoint", "ConvergenceError", "CorrelationResult", "G2Map", "MediumParams",
    "NoRootError", "OpenRates", "SteadyState", "SweepResult", "SweepSpec", "alpha",
    "diffusion_matrix", "g2_floor_open", "g2_normalized", "g2_zero", "g2_zero_map", "psi_b_zero",
    "psi_s_zero", "run_sweep", "saturation", "solve_detuned_branch", "solve_od_a_asymptotic",
    "solve_od_a_resonant", "steady_state", "voigt_hwhm",
]
