"""Linear model container, branch-and-bound solver and model text formats."""
from .model import (BINARY, CONTINUOUS, INTEGER, FEAS_TOL, INT_TOL, REL_GAP, MilpModel,
                    MilpSolution, ModelError, Status, check_solution, relative_gap)
from .bnb import solve, solve_lp_relaxation

__all__ = [
    "BINARY", "CONTINUOUS", "INTEGER", "FEAS_TOL", "INT_TOL", "REL_GAP", "MilpModel",
    "MilpSolution", "ModelError", "Status", "check_solution", "relative_gap", "solve",
    "solve_lp_relaxation",
]
