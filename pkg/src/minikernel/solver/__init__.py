from .interface import Solver, SolverOptions, maximize, minimize
from .query import SolverStats, Verdict, validate_model

__all__ = [
    "Solver",
    "SolverOptions",
    "SolverStats",
    "Verdict",
    "maximize",
    "minimize",
    "validate_model",
]
