"""Serial production line: advection processors, queues and boundary feedback.

Processors are transport equations discretized by an upwind scheme,
queues are explicit-Euler ODEs, and a weighted energy monitors stability
of the closed loop under linear or mixed feedback of the line's outflow.
"""
from .discretization import HARD, CouplingMode, SimState, smoothed, step, total_mass
from .errors import (
    AssumptionViolated,
    CflViolation,
    NonFiniteState,
    OracleMismatch,
    ParseError,
    ProdstabError,
    UnknownScenario,
    UnsupportedShape,
    ValidationError,
)
from .experiments import (
    Scenario,
    builtin_scenarios,
    capacity_gap_study,
    convergence_study,
    kappa_sweep,
    oracle_smallcase,
    run_builtin,
)
from .feedback import Linear, Mixed, OpenLoop, control, kappa_bound, semidefinite_check
from .lyapunov import (
    LyapunovWeights,
    decay_rate,
    discrete_V,
    proof_terms,
    stability_residual,
    upper_bound,
)
from .network import GridSpec, NetworkSpec, ValidatedConfig, validate_network
from .simulation import Trajectory, available_backends, default_backend, simulate

__version__ = "0.1.0"

__all__ = [
    "HARD", "CouplingMode", "SimState", "smoothed", "step", "total_mass",
    "AssumptionViolated", "CflViolation", "NonFiniteState", "OracleMismatch", "ParseError",
    "ProdstabError", "UnknownScenario", "UnsupportedShape", "ValidationError",
    "Scenario", "builtin_scenarios", "capacity_gap_study", "convergence_study", "kappa_sweep",
    "oracle_smallcase", "run_builtin",
    "Linear", "Mixed", "OpenLoop", "control", "kappa_bound", "semidefinite_check",
    "LyapunovWeights", "decay_rate", "discrete_V", "proof_terms", "stability_residual", "upper_bound",
    "GridSpec", "NetworkSpec", "ValidatedConfig", "validate_network",
    "Trajectory", "available_backends", "default_backend", "simulate",
]
