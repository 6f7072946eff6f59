"""Bounded-variable revised primal simplex on sparse data.

Two phases with one artificial column per row, a sparse LU of the basis
refreshed every ``refactor`` pivots with product-form eta updates in
between, Dantzig pricing and a switch to Bland's rule while the method is
stalling on degenerate pivots.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .. import _kernels
from .._kernels import AT_LOWER, AT_UPPER, BASIC
from ..errors import NumericalFailure

logger = logging.getLogger(__name__)


@dataclass
class SimplexResult:
    x: np.ndarray
    status: str
    iterations: int
    runtime: float
    phase1_objective: float


class _BasisFactor:
    def __init__(self, a, basis, refactor):
        self.a = a
        self.refactor_every = refactor
        self.factor(basis)

    def factor(self, basis):
        b = self.a[:, basis].tocsc()
        try:
            self.lu = splu(b, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise NumericalFailure(f"singular basis: {exc}") from None
        self.etas = []

    @property
    def stale(self):
        return len(self.etas) >= self.refactor_every

    def ftran(self, v):
        x = self.lu.solve(np.asarray(v, dtype=np.float64))
        for r, col in self.etas:
            xr = x[r] / col[r]
            x -= col * xr
            x[r] = xr
        return x

    def btran(self, v):
        z = np.array(v, dtype=np.float64)
        for r, col in reversed(self.etas):
            z[r] = (z[r] - (col @ z - col[r] * z[r])) / col[r]
        return self.lu.solve(z, trans="T")

    def update(self, r, alpha):
        self.etas.append((r, alpha.copy()))


def solve_bounded(a, b, c, lb, ub, *, max_iter=500_000, opt_tol=1e-9, feas_tol=1e-9,
                  pivot_tol=1e-9, refactor=64, stall_limit=50, time_limit=None,
                  perturb=1e-6, seed=0):
    """Minimise ``c @ x`` subject to ``a @ x == b`` and ``lb <= x <= ub``.

    ``lb`` must be finite. Returns a :class:`SimplexResult` whose ``status`` is
    ``"optimal"``, ``"infeasible"``, ``"unbounded"`` or ``"iteration_limit"``.

    Finite structural bounds are widened by random amounts of order
    ``perturb`` while iterating, which breaks the heavy primal degeneracy of
    flow-conservation rows. Afterwards the true bounds are restored and a short
    dual simplex pass removes the resulting primal infeasibility; the basis
    stays dual feasible because reduced costs do not depend on bounds.
    ``perturb=0`` disables this.
    """
    t0 = time.perf_counter()
    a = sparse.csc_matrix(a, dtype=np.float64)
    m, n = a.shape
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    lb = np.asarray(lb, dtype=np.float64)
    ub = np.asarray(ub, dtype=np.float64)
    if np.any(lb > ub):
        return SimplexResult(lb.copy(), "infeasible", 0, time.perf_counter() - t0, np.inf)

    lo = np.concatenate([lb, np.zeros(m)])
    hi = np.concatenate([ub, np.full(m, np.inf)])
    true_lo, true_hi = lo.copy(), hi.copy()
    if perturb > 0:
        rng = np.random.default_rng(seed)
        free = np.flatnonzero(lb < ub)
        lo[free] -= perturb * (1.0 + rng.random(len(free)))
        fin = free[np.isfinite(ub[free])]
        hi[fin] += perturb * (1.0 + rng.random(len(fin)))

    # start with every structural at its lower bound, artificials absorb the residual
    x = lo.copy()
    r0 = b - a @ lo[:n]
    sgn = np.where(r0 >= 0, 1.0, -1.0)
    x[n:] = np.abs(r0)
    a_full = sparse.hstack([a, sparse.diags(sgn)], format="csc")
    status = np.full(n + m, AT_LOWER, dtype=np.int8)
    basis = np.arange(n, n + m)
    status[basis] = BASIC
    indptr, indices, data = a_full.indptr, a_full.indices, a_full.data
    fac = _BasisFactor(a_full, basis, refactor)
    iters = 0

    def out_of_time():
        return iters >= max_iter or (time_limit and time.perf_counter() - t0 > time_limit)

    def recompute_basics():
        fac.factor(basis)
        nb = status != BASIC
        x[basis] = fac.ftran(b - a_full[:, np.flatnonzero(nb)] @ x[nb])

    def column(q):
        col = np.zeros(m)
        col[indices[indptr[q]:indptr[q + 1]]] = data[indptr[q]:indptr[q + 1]]
        return col

    def run(cost):
        nonlocal iters
        bland, stall = False, 0
        while True:
            if out_of_time():
                return "iteration_limit"
            if fac.stale:
                recompute_basics()
            y = fac.btran(cost[basis])
            d = _kernels.reduced_costs(indptr, indices, data, cost, y)
            q = _kernels.choose_entering(d, status, opt_tol, bland)
            if q < 0:
                return "optimal"
            sign = 1.0 if status[q] == AT_LOWER else -1.0
            alpha = fac.ftran(column(q))
            theta, r, to_upper = _kernels.ratio_test(
                x[basis], alpha, lo[basis], hi[basis], basis, sign, hi[q] - lo[q], pivot_tol, bland
            )
            if not np.isfinite(theta):
                return "unbounded"
            iters += 1
            if theta > 1e-12:
                x[basis] -= sign * theta * alpha
                x[q] += sign * theta
                bland, stall = False, 0
            else:
                stall += 1
                bland = bland or stall > stall_limit
            if r < 0:
                status[q] = AT_UPPER if sign > 0 else AT_LOWER
                x[q] = hi[q] if sign > 0 else lo[q]
                continue
            leave = basis[r]
            status[leave] = AT_UPPER if to_upper else AT_LOWER
            x[leave] = hi[leave] if to_upper else lo[leave]
            basis[r] = q
            status[q] = BASIC
            fac.update(r, alpha)

    def dual_cleanup(cost):
        """Bounded dual simplex from a dual-feasible basis until primal feasible."""
        nonlocal iters
        while True:
            if out_of_time():
                return "iteration_limit"
            if fac.stale:
                recompute_basics()
            xb = x[basis]
            below = lo[basis] - xb
            above = xb - hi[basis]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= feas_tol:
                return "optimal"
            e = np.zeros(m)
            e[r] = 1.0
            rho = fac.btran(e)
            row = _kernels.reduced_costs(indptr, indices, data, np.zeros(n + m), -rho)
            y = fac.btran(cost[basis])
            d = _kernels.reduced_costs(indptr, indices, data, cost, y)
            # leaving variable rises to its lower bound (below) or falls to its upper bound
            up = below[r] > 0
            at_lo = (status == AT_LOWER) & (lo < hi)
            at_hi = (status == AT_UPPER) & (lo < hi)
            if up:
                elig = (at_lo & (row < -pivot_tol)) | (at_hi & (row > pivot_tol))
            else:
                elig = (at_lo & (row > pivot_tol)) | (at_hi & (row < -pivot_tol))
            if not elig.any():
                return "infeasible"
            ratio = np.full(n + m, np.inf)
            ratio[elig] = np.abs(d[elig]) / np.abs(row[elig])
            q = int(np.argmin(ratio))
            alpha = fac.ftran(column(q))
            target = lo[basis[r]] if up else hi[basis[r]]
            theta = (xb[r] - target) / alpha[r]
            x[basis] -= theta * alpha
            x[q] += theta
            leave = basis[r]
            status[leave] = AT_LOWER if up else AT_UPPER
            x[leave] = target
            basis[r] = q
            status[q] = BASIC
            fac.update(r, alpha)
            iters += 1

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    st = run(phase1_cost)
    infeas = float(x[n:].sum())
    if st != "optimal":
        return SimplexResult(x[:n].copy(), st, iters, time.perf_counter() - t0, infeas)
    if infeas > max(feas_tol, 10 * perturb * m) * max(1.0, np.abs(b).max(initial=0.0)):
        return SimplexResult(x[:n].copy(), "infeasible", iters, time.perf_counter() - t0, infeas)

    # artificials are pinned at zero; basic ones on redundant rows stay degenerate
    hi[n:] = 0.0
    x[n:] = np.where(status[n:] == BASIC, x[n:], 0.0)
    cost = np.concatenate([c, np.zeros(m)])
    st = run(cost)
    if st == "optimal" and perturb > 0:
        lo[:], hi[:n] = true_lo, true_hi[:n]
        nb = status != BASIC
        x[nb] = np.where(status[nb] == AT_UPPER, hi[nb], lo[nb])
        recompute_basics()
        st = dual_cleanup(cost)
        if st == "optimal":
            st = run(cost)
    recompute_basics()
    logger.debug("simplex finished status=%s iterations=%d", st, iters)
    return SimplexResult(x[:n].copy(), st, iters, time.perf_counter() - t0, infeas)
