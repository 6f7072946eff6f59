"""Fixed-format MPS writer and a tolerant reader for the equality-constrained LPs used here."""

from pathlib import Path

import numpy as np
from scipy import sparse

from ..errors import SolverError

_MAX_NAMES = 10 ** 7


def _num(v):
    """Shortest representation fitting the 12-character MPS number field."""
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for p in range(12, 0, -1):
        s = f"{v:.{p}g}"
        if len(s) <= 12:
            return s
    raise SolverError(f"cannot format {v!r} in 12 characters")


def _line(f1="", f2="", f3="", f4="", f5="", f6=""):
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def export_mps(problem, path, name="CYCMATCH"):
    """Write ``problem`` as fixed-format MPS (all rows ``E``; ``UP``/``LO`` bounds)."""
    m, n = problem.shape
    if m == 0 or n == 0:
        raise SolverError("refusing to export an empty problem")
    if m >= _MAX_NAMES or n >= _MAX_NAMES:
        raise SolverError("problem too large for 8-character fixed-format names")
    A = sparse.csc_matrix(problem.A)
    rname = [f"R{i:07d}" for i in range(m)]
    cname = [f"C{j:07d}" for j in range(n)]
    out = [f"NAME          {name[:8]}", "ROWS", " N  COST"]
    out += [f" E  {r}" for r in rname]
    out.append("COLUMNS")
    for j in range(n):
        entries = []
        if problem.c[j] != 0:
            entries.append(("COST", problem.c[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(rname[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        for t in range(0, len(entries), 2):
            pair = entries[t:t + 2]
            f5, f6 = (pair[1][0], _num(pair[1][1])) if len(pair) > 1 else ("", "")
            out.append(_line("", cname[j], pair[0][0], _num(pair[0][1]), f5, f6))
    out.append("RHS")
    nz = np.flatnonzero(problem.b)
    for t in range(0, len(nz), 2):
        i = nz[t]
        f5, f6 = (rname[nz[t + 1]], _num(problem.b[nz[t + 1]])) if t + 1 < len(nz) else ("", "")
        out.append(_line("", "RHS", rname[i], _num(problem.b[i]), f5, f6))
    out.append("BOUNDS")
    for j in range(n):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == hi:
            out.append(_line("FX", "BND", cname[j], _num(lo)))
            continue
        if lo != 0:
            out.append(_line("LO", "BND", cname[j], _num(lo)))
        if np.isfinite(hi):
            out.append(_line("UP", "BND", cname[j], _num(hi)))
    out.append("ENDATA")
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise SolverError(f"cannot write {path}: {exc}") from None


def read_mps(path):
    """Parse an MPS file with only ``E`` rows into an :class:`LpProblem`."""
    from .lp import LpProblem

    section = None
    rows, cols = {}, {}
    obj = None
    trip_r, trip_c, trip_v, cost, rhs = [], [], [], {}, {}
    bounds = {}
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            section = raw.split()[0]
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, nm = tok
            if kind == "N":
                obj = nm
            elif kind == "E":
                rows[nm] = len(rows)
            else:
                raise SolverError(f"{path}: unsupported row type {kind}")
        elif section == "COLUMNS":
            cn = tok[0]
            j = cols.setdefault(cn, len(cols))
            for rn, val in zip(tok[1::2], tok[2::2]):
                if rn == obj:
                    cost[j] = float(val)
                else:
                    trip_r.append(rows[rn])
                    trip_c.append(j)
                    trip_v.append(float(val))
        elif section == "RHS":
            for rn, val in zip(tok[1::2], tok[2::2]):
                if rn != obj:
                    rhs[rows[rn]] = float(val)
        elif section == "BOUNDS":
            kind, _, cn, *val = tok
            bounds.setdefault(cols[cn], []).append((kind, float(val[0]) if val else None))
    m, n = len(rows), len(cols)
    A = sparse.csr_matrix((trip_v, (trip_r, trip_c)), shape=(m, n))
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    lb, ub = np.zeros(n), np.full(n, np.inf)
    for j, items in bounds.items():
        for kind, v in items:
            if kind == "UP":
                ub[j] = v
            elif kind == "LO":
                lb[j] = v
            elif kind == "FX":
                lb[j] = ub[j] = v
            elif kind == "BV":
                lb[j], ub[j] = 0.0, 1.0
    return LpProblem(A, b, c, lb, ub)
