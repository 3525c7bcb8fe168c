"""Access-aware allocation of scarce divisible resources across locations."""

from .analysis import ImpactParams, expected_adverse, slope_condition, soft_nn_interpolate
from .engine import (
    EngineConfig,
    SolveTrace,
    SweepResult,
    proportional,
    solve_access_aware,
    solve_bayesian,
    solve_minimax,
    solve_naive,
    sweep_eta,
)
from .errors import AccessAllocError, InfeasibleError, ScaleError, ValidationError
from .model import (
    AcquisitionOutcome,
    Allocation,
    DisparityReport,
    Distance,
    EtaSpec,
    LocationProfile,
    RhoModel,
    Scenario,
    acquisition,
    approx_rho,
    disparity,
    exact_rho,
    is_feasible,
    naive_rho,
    rate_disparity,
    rd_approx,
)
from .optimize import build_lp, enumerate_vertices, solve
from .sim import SimConfig, dp_exact_rho, simulate_acquisition, trajectories

__version__ = "0.1.0"

__all__ = [
    "AccessAllocError",
    "AcquisitionOutcome",
    "Allocation",
    "DisparityReport",
    "Distance",
    "EngineConfig",
    "EtaSpec",
    "ImpactParams",
    "InfeasibleError",
    "LocationProfile",
    "RhoModel",
    "ScaleError",
    "Scenario",
    "SimConfig",
    "SolveTrace",
    "SweepResult",
    "ValidationError",
    "acquisition",
    "approx_rho",
    "build_lp",
    "disparity",
    "dp_exact_rho",
    "enumerate_vertices",
    "exact_rho",
    "expected_adverse",
    "is_feasible",
    "naive_rho",
    "proportional",
    "rate_disparity",
    "rd_approx",
    "simulate_acquisition",
    "slope_condition",
    "soft_nn_interpolate",
    "solve",
    "solve_access_aware",
    "solve_bayesian",
    "solve_minimax",
    "solve_naive",
    "sweep_eta",
    "trajectories",
]
