"""LP relaxation solving, branch-and-bound fallback and MPS export."""

from .lp import (
    BACKENDS,
    EPS_FEAS,
    EPS_INT,
    LpProblem,
    LpSolution,
    default_backend,
    is_integral,
    solve_ilp_branch_and_bound,
    solve_lp,
)
from .mps import export_mps, read_mps
from .simplex import solve_bounded

__all__ = [
    "BACKENDS", "EPS_FEAS", "EPS_INT", "LpProblem", "LpSolution", "default_backend",
    "export_mps", "is_integral", "read_mps", "solve_bounded", "solve_ilp_branch_and_bound",
    "solve_lp",
]
