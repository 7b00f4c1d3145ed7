"""Optimal dividend barriers for a multi-line insurance group under default contagion.

The group pays dividends from each surviving line under a barrier strategy
whose level depends on which other lines have already defaulted.  The value
functions solve a family of variational inequalities coupled through the
default-state lattice; `solve_all` builds them in closed form by backward
induction, `verify` re-checks every analytic property numerically, and
`simulate` prices any barrier policy by Monte Carlo as an independent cross
check.
"""
from .expfun import (
    ContractViolationError,
    EvaluationRangeError,
    ExpPolyPiece,
    ExpPolyPiecewise,
    ExpPolyTerm,
    convolve_green,
)
from .explicit2 import (
    Explicit2Solution,
    ExplicitLine,
    RootCollisionError,
    SingleSurvivorForm,
    single_survivor_barrier,
    single_survivor_form,
    solve_explicit2,
)
from .model import ConfigError, DefaultState, ModelParams, load_config, params_from_config
from .recursion import PolicySolution, SolveError, solve_all, value
from .simulate import (
    BarrierPolicy,
    ComparisonRow,
    SimConfig,
    SimResult,
    compare_policies,
    default_chain_residuals,
    simulate_policy,
)
from .verify import (
    CheckResult,
    GridSpec,
    VerificationReport,
    check_derivatives,
    check_hjbvi,
    check_orderings,
    run_all,
)
from .vi_solver import (
    DEFAULT_SETTINGS,
    ConstructionError,
    NoBoundaryError,
    OperatorCoeffs,
    SolverSettings,
    VISolution,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierPolicy",
    "CheckResult",
    "ComparisonRow",
    "ConfigError",
    "ConstructionError",
    "ContractViolationError",
    "DEFAULT_SETTINGS",
    "DefaultState",
    "EvaluationRangeError",
    "Explicit2Solution",
    "ExplicitLine",
    "ExpPolyPiece",
    "ExpPolyPiecewise",
    "ExpPolyTerm",
    "GridSpec",
    "ModelParams",
    "NoBoundaryError",
    "OperatorCoeffs",
    "PolicySolution",
    "RootCollisionError",
    "SimConfig",
    "SimResult",
    "SingleSurvivorForm",
    "SolveError",
    "SolverSettings",
    "VerificationReport",
    "VISolution",
    "check_derivatives",
    "check_hjbvi",
    "check_orderings",
    "compare_policies",
    "convolve_green",
    "default_chain_residuals",
    "load_config",
    "params_from_config",
    "run_all",
    "simulate_policy",
    "single_survivor_barrier",
    "single_survivor_form",
    "solve_all",
    "solve_explicit2",
    "value",
]
