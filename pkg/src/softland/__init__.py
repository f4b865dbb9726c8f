"""Indirect-method solvers for time- and fuel-optimal lunar soft landing."""

from .dynamics import (
    Control,
    CostRegime,
    Costate,
    Engine,
    LanderState,
    optimal_control,
    optimal_steering,
    smoothed_throttle,
    switching_value,
)
from .homotopy import (
    HomotopyError,
    HomotopySchedule,
    HomotopyTrace,
    StageRecord,
    solve_fuel_direct,
    solve_fuel_homotopy,
)
from .integrator import (
    IntegrationSettings,
    PropagationError,
    Trajectory,
    propagate,
)
from .montecarlo import (
    BatchOptions,
    BatchStats,
    CaseRecord,
    DomainA,
    run_batch,
    sample_domain,
)
from .rootfind import SolveReport, SolverSettings, SolveStatus, solve
from .scaling import PhysicalConstants, Scales, UnitRole
from .shooting import (
    EstimateBundle,
    Formulation,
    InitialCondition,
    LandingOutcome,
    ShootingVector,
    SolveOutcome,
    estimate,
    initial_guess,
    residual,
    solve_shooting,
    solve_time_optimal,
)

__version__ = "0.1.0"

__all__ = [
    "BatchOptions",
    "BatchStats",
    "CaseRecord",
    "Control",
    "CostRegime",
    "Costate",
    "DomainA",
    "Engine",
    "EstimateBundle",
    "Formulation",
    "HomotopyError",
    "HomotopySchedule",
    "HomotopyTrace",
    "InitialCondition",
    "IntegrationSettings",
    "LanderState",
    "LandingOutcome",
    "PhysicalConstants",
    "PropagationError",
    "Scales",
    "ShootingVector",
    "SolveOutcome",
    "SolveReport",
    "SolveStatus",
    "SolverSettings",
    "StageRecord",
    "Trajectory",
    "UnitRole",
    "estimate",
    "initial_guess",
    "optimal_control",
    "optimal_steering",
    "propagate",
    "residual",
    "run_batch",
    "sample_domain",
    "smoothed_throttle",
    "solve",
    "solve_fuel_direct",
    "solve_fuel_homotopy",
    "solve_shooting",
    "solve_time_optimal",
    "switching_value",
]
