import heapq
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from ..errors import BackendUnavailable, DimensionMismatch, NodeLimitExceeded, NumericalFailure
from .simplex import solve_bounded

logger = logging.getLogger(__name__)

EPS_INT = 1e-5
EPS_FEAS = 1e-7
BACKENDS = ("highs", "simplex")
BACKEND_ENV = "CYCLEMATCH_BACKEND"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``min c @ x  s.t.  A x = b,  lb <= x <= ub`` (bounds default to ``[0, 1]``)."""

    A: sparse.csr_matrix
    b: np.ndarray
    c: np.ndarray
    lb: np.ndarray = None
    ub: np.ndarray = None
    system: object = field(default=None, repr=False)

    def __post_init__(self):
        A = sparse.csr_matrix(self.A, dtype=np.float64)
        m, n = A.shape
        c = np.asarray(self.c, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=np.float64)
        ub = np.ones(n) if self.ub is None else np.asarray(self.ub, dtype=np.float64)
        if c.shape != (n,) or b.shape != (m,) or lb.shape != (n,) or ub.shape != (n,):
            raise DimensionMismatch(
                f"inconsistent LP dimensions: A {A.shape}, b {b.shape}, c {c.shape}"
            )
        for name, val in (("A", A), ("b", b), ("c", c), ("lb", lb), ("ub", ub)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_system(cls, system, c):
        return cls(system.matrix(), system.b.astype(np.float64), c, system=system)

    @property
    def shape(self):
        return self.A.shape

    def with_bounds(self, lb, ub):
        return replace(self, lb=lb, ub=ub)


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    integral: bool
    iterations: int = 0
    runtime: float = 0.0
    backend: str = ""
    branches: int = 0
    max_residual: float = 0.0

    @property
    def fractionality(self):
        return float(np.max(np.minimum(np.abs(self.x), np.abs(1 - self.x)), initial=0.0))


def is_integral(x, tol=EPS_INT):
    x = np.asarray(x)
    return bool(np.all(np.minimum(np.abs(x), np.abs(1.0 - x)) <= tol))


def default_backend():
    return os.environ.get(BACKEND_ENV, "highs")


def _solve_highs(problem, time_limit):
    from scipy.optimize import linprog

    options = {"presolve": True}
    if time_limit:
        options["time_limit"] = float(time_limit)
    res = linprog(problem.c, A_eq=problem.A, b_eq=problem.b,
                  bounds=np.column_stack([problem.lb, problem.ub]), method="highs",
                  options=options)
    if res.status == 0:
        return res.x, "optimal", int(res.nit)
    if res.status == 2:
        return np.zeros(problem.shape[1]), "infeasible", int(res.nit or 0)
    if res.status == 3:
        return np.zeros(problem.shape[1]), "unbounded-guard", int(res.nit or 0)
    raise NumericalFailure(f"highs: {res.message}")


def _solve_simplex(problem, time_limit):
    res = solve_bounded(problem.A, problem.b, problem.c, problem.lb, problem.ub,
                        time_limit=time_limit)
    if res.status == "iteration_limit":
        raise NumericalFailure(f"simplex: iteration/time limit after {res.iterations} pivots")
    status = {"unbounded": "unbounded-guard"}.get(res.status, res.status)
    return res.x, status, res.iterations


def solve_lp(problem, backend=None, time_limit=None):
    """Solve the LP relaxation with the chosen backend (``highs`` or ``simplex``)."""
    backend = backend or default_backend()
    t0 = time.perf_counter()
    if backend == "highs":
        x, status, nit = _solve_highs(problem, time_limit)
    elif backend == "simplex":
        x, status, nit = _solve_simplex(problem, time_limit)
    else:
        raise BackendUnavailable(f"unknown LP backend {backend!r}; available: {', '.join(BACKENDS)}")
    runtime = time.perf_counter() - t0
    resid = 0.0
    if status == "optimal":
        x = np.clip(x, problem.lb, problem.ub)
        resid = float(np.abs(problem.A @ x - problem.b).max(initial=0.0))
        scale = max(1.0, float(np.abs(problem.b).max(initial=0.0)))
        if resid > EPS_FEAS * scale * 10:
            raise NumericalFailure(f"{backend}: feasibility residual {resid:.3g} exceeds tolerance")
    sol = LpSolution(x, float(problem.c @ x), status, is_integral(x) if status == "optimal" else False,
                     nit, runtime, backend, 0, resid)
    logger.debug("lp backend=%s status=%s obj=%.9g it=%d t=%.3fs", backend, status,
                 sol.objective, nit, runtime)
    return sol


def solve_ilp_branch_and_bound(problem, node_limit=10_000, backend=None, root=None):
    """Best-first branch and bound over binary variables.

    Parameters
    ----------
    problem : LpProblem
    node_limit : int
        Maximum number of LP relaxations solved after the root.
    root : LpSolution, optional
        Already computed root relaxation.

    Raises
    ------
    NodeLimitExceeded
        If the search is not finished within ``node_limit`` nodes.
    """
    t0 = time.perf_counter()
    root = root or solve_lp(problem, backend)
    if root.status != "optimal" or root.integral:
        return root
    best = None
    counter = 0
    heap = [(root.objective, counter, problem.lb.copy(), problem.ub.copy(), root)]
    nodes = 0
    iters = root.iterations
    while heap:
        bound, _, lb, ub, sol = heapq.heappop(heap)
        if best is not None and bound >= best.objective - 1e-9:
            continue
        frac = np.minimum(np.abs(sol.x), np.abs(1 - sol.x))
        j = int(np.argmax(frac))
        for val in (1.0, 0.0) if sol.x[j] >= 0.5 else (0.0, 1.0):
            nodes += 1
            if nodes > node_limit:
                raise NodeLimitExceeded(f"branch and bound exceeded {node_limit} nodes")
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            child = solve_lp(problem.with_bounds(clb, cub), backend or root.backend)
            iters += child.iterations
            if child.status != "optimal":
                continue
            if best is not None and child.objective >= best.objective - 1e-9:
                continue
            if child.integral:
                best = child
            else:
                counter += 1
                heapq.heappush(heap, (child.objective, counter, clb, cub, child))
    if best is None:
        return LpSolution(root.x, np.inf, "infeasible", False, iters,
                          time.perf_counter() - t0, root.backend, nodes)
    best.x = np.rint(best.x)
    best.objective = float(problem.c @ best.x)
    best.branches = nodes
    best.iterations = iters
    best.runtime = time.perf_counter() - t0
    return best
