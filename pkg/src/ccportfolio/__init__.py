"""Robust chance-constrained portfolio selection under mean ambiguity."""

from .approximation import (
    KINDS,
    ConvexProgram,
    QuadConstraint,
    build_bernstein,
    build_nominal,
    build_piecewise_linear,
    build_piecewise_quadratic,
    build_program,
    verify_generating_function,
)
from .frontier import FrontierTable, emit, sweep
from .market_data import MomentEstimates, PriceSeries, ReturnMatrix, compute_returns, estimate_moments, read_prices_csv
from .solver import Solution, SolveOptions, feasibility_phase, solve
from .uncertainty import BasicShifts, PerturbationFamily, UncertainReturnModel, worst_case_mean_return
from .validator import ScenarioDistribution, ValidationReport, sample_scenarios, validate

__version__ = "0.1.0"
