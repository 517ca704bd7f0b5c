"""Cubic regularized Newton methods for composite uniformly convex problems."""

from .analysis import (BoundReport, ConstantsEstimate, PairSampler, estimate_constants,
                       theoretical_budgets, verify_trace)
from .normed_space import ContractViolation, MetricOperator
from .oracles import (BallIndicator, KnownConstants, Problem, ZeroPart, make_logsumexp,
                      make_powered_norm, make_quadratic, make_sum, with_ball)
from .solvers import (SOLVERS, SolverConfig, Trace, adaptive_cubic_newton, fixed_nu_newton,
                      gradient_descent)
from .subproblem import ModelSolution, SubproblemSettings, solve_model

__all__ = [
    "BallIndicator", "BoundReport", "ConstantsEstimate", "ContractViolation", "KnownConstants",
    "MetricOperator", "ModelSolution", "PairSampler", "Problem", "SOLVERS", "SolverConfig",
    "SubproblemSettings", "Trace", "ZeroPart", "adaptive_cubic_newton", "estimate_constants",
    "fixed_nu_newton", "gradient_descent", "make_logsumexp", "make_powered_norm",
    "make_quadratic", "make_sum", "solve_model", "theoretical_budgets", "verify_trace",
    "with_ball",
]
