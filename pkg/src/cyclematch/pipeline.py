"""End-to-end matching: build, solve, decode."""

import logging
import time
from dataclasses import dataclass, field

from .cost import compute_costs
from .cycles import decompose
from .errors import SolverError
from .hypergraph import build_product_system, reduce_system
from .matching import decode
from .mesh import build_shape_graph, check_genus_match
from .solver import LpProblem, solve_ilp_branch_and_bound, solve_lp

logger = logging.getLogger(__name__)


@dataclass
class MatchResult:
    system: object
    costs: object
    solution: object
    matching: object
    used_branch_and_bound: bool
    timings: dict = field(default_factory=dict)


def build_system(source, target, k=2, reduce=True):
    """Product constraint system for two meshes; returns ``(system, source_graph, target_graph)``."""
    check_genus_match(source, target)
    gs, gt = build_shape_graph(source), build_shape_graph(target)
    system = build_product_system(decompose(gs), gt, k, gs)
    if reduce:
        system = reduce_system(system)
    return system, gs, gt


def run_match(source, target, fx, fy, *, k=2, reduce=True, backend=None, norm="l2",
              node_limit=10_000, time_limit=None):
    """Match ``source`` into ``target`` with per-vertex features ``fx`` and ``fy``.

    The LP relaxation is solved first; branch and bound runs only when the
    relaxation is fractional.
    """
    t = {}
    t0 = time.perf_counter()
    system, gs, gt = build_system(source, target, k, reduce)
    t["build"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    c = compute_costs(fx, fy, system, norm)
    t["cost"] = time.perf_counter() - t0
    problem = LpProblem.from_system(system, c)
    t0 = time.perf_counter()
    sol = solve_lp(problem, backend, time_limit)
    used_bb = False
    if sol.status == "optimal" and not sol.integral:
        logger.warning("relaxation fractional (max %.3g); falling back to branch and bound",
                       sol.fractionality)
        sol = solve_ilp_branch_and_bound(problem, node_limit, backend, root=sol)
        used_bb = True
    t["solve"] = time.perf_counter() - t0
    if sol.status != "optimal":
        raise SolverError(f"no feasible matching: solver status {sol.status}")
    t0 = time.perf_counter()
    m = decode(sol, system, gs, gt)
    t["decode"] = time.perf_counter() - t0
    return MatchResult(system, c, sol, m, used_bb, t)
