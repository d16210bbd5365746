"""Robust fixed-lag smoother synthesis and simulation toolkit.

Builds infinite-horizon robust estimators with a fixed-lag smoothing stage
for uncertain systems carrying sector/Lipschitz-bounded nonlinearities,
via scaled Riccati equations, and validates the designs with stationary
covariance analysis and nonlinear Monte Carlo simulation.
"""

__version__ = "0.1.0"

from .delay import DelayModel, delay_response_error, identity_delay, pade_delay
from .errors import (
    ConfigError,
    CouplingError,
    DimensionError,
    InfeasibleError,
    NumericalError,
    StationarityError,
    ToolkitError,
)
from .model import (
    AugmentedPlant,
    CompactPlant,
    NonlinearityBank,
    UncertainPlant,
    augment_with_delay,
    build_compact,
    validate_plant,
)
from .numkernel import (
    CareSolution,
    RiccatiProblem,
    expm,
    is_hurwitz,
    solve_care,
    solve_lyapunov,
    spectral_radius,
)
from .synthesis import (
    MultiplierPair,
    ScalingPoint,
    SynthesisSolution,
    assemble_multipliers,
    compute_gains,
    cost_bound,
    control_riccati,
    feasible,
    filter_riccati,
    minimize_bound,
)
from .covariance import (
    ClosedLoopModel,
    CovarianceReport,
    build_closed_loop,
    delta_sweep,
    smoothed_error_covariance,
)
from .sim import MonteCarloReport, SimConfig, monte_carlo, simulate_run

__all__ = [
    "__version__",
    "DelayModel", "pade_delay", "identity_delay", "delay_response_error",
    "ToolkitError", "ConfigError", "DimensionError", "InfeasibleError",
    "CouplingError", "NumericalError", "StationarityError",
    "UncertainPlant", "NonlinearityBank", "AugmentedPlant", "CompactPlant",
    "validate_plant", "augment_with_delay", "build_compact",
    "RiccatiProblem", "CareSolution", "solve_care", "solve_lyapunov",
    "expm", "spectral_radius", "is_hurwitz",
    "ScalingPoint", "MultiplierPair", "SynthesisSolution",
    "assemble_multipliers", "feasible", "filter_riccati", "control_riccati",
    "compute_gains", "cost_bound", "minimize_bound",
    "ClosedLoopModel", "CovarianceReport", "build_closed_loop",
    "smoothed_error_covariance", "delta_sweep",
    "SimConfig", "MonteCarloReport", "simulate_run", "monte_carlo",
]
