"""Decoding LP solutions into vertex maps and checking neighbourhood preservation."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels
from .errors import (
    FractionalSolution,
    InconsistentVertexMap,
    InfeasibleSolution,
    MatchingError,
    TooLarge,
)
from .hypergraph import COUPLING, EDGE_TO_VERTEX, FLOW, INJECTIVITY, VERTEX_TO_EDGE, expand_solution
from .solver.lp import EPS_INT, LpSolution

logger = logging.getLogger(__name__)

EDGE_MATCH_DTYPE = np.dtype([
    ("x_edge", np.int32), ("x_tail", np.int32), ("x_head", np.int32),
    ("y_tail", np.int32), ("y_head", np.int32), ("layer", np.int8),
])


@dataclass
class ConsistencyReport:
    violations: list = field(default_factory=list)
    n_checked: int = 0
    n_skipped: int = 0

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "consistent": self.ok,
            "edges_checked": self.n_checked,
            "edges_skipped_unmatched": self.n_skipped,
            "violations": [
                {"source_edge": [a, b], "image": [ya, yb]} for a, b, ya, yb in self.violations
            ],
        }


@dataclass
class Matching:
    """Decoded matching.

    Attributes
    ----------
    vertex_map : numpy.ndarray
        Target vertex per source vertex, ``-1`` where unmatched.
    edge_matches : numpy.ndarray
        One record per active source-edge variable (``EDGE_MATCH_DTYPE``).
    stretch : dict
        For ``k > 0`` solutions, source vertex -> sorted target vertices its
        image path visits, only for vertices that use vertex-to-edge steps.
    """

    vertex_map: np.ndarray
    edge_matches: np.ndarray
    n_vertex_to_edge: int = 0
    stretch: dict = field(default_factory=dict)
    certificate: ConsistencyReport = None

    @property
    def partial_flags(self):
        return self.vertex_map < 0

    @property
    def n_degenerate(self):
        return int(np.sum(self.edge_matches["y_tail"] == self.edge_matches["y_head"]))

    @property
    def collapse_fraction(self):
        n = len(self.edge_matches)
        return self.n_degenerate / n if n else 0.0


def _violated_rows(system, resid):
    kinds = system.row_meta["kind"][resid != 0]
    names = {FLOW: "flow", COUPLING: "coupling", INJECTIVITY: "injectivity"}
    return ", ".join(f"{int((kinds == k).sum())} {n}" for k, n in names.items() if (kinds == k).any())


def decode(x, system, source=None, target=None):
    """Turn an integral solution of ``system`` into a :class:`Matching`.

    ``x`` may be an :class:`LpSolution` or a plain vector. For reduced systems
    the vector is first expanded to the full system; feasibility is then
    re-checked in exact integer arithmetic. When both shape graphs are given
    the consistency certificate is attached.
    """
    if isinstance(x, LpSolution):
        x = x.x
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (system.n_cols,):
        raise MatchingError(f"solution length {x.shape} does not match {system.n_cols} columns")
    frac = np.minimum(np.abs(x), np.abs(1 - x))
    if frac.max(initial=0.0) > EPS_INT:
        raise FractionalSolution(
            f"{int((frac > EPS_INT).sum())} fractional entries (max distance {frac.max():.3g})"
        )
    xi = np.rint(x).astype(np.int64)
    full = system
    if system.reduced:
        xi = expand_solution(xi, system.merge_map)
        full = system.parent
    resid = full.residual(xi)
    if np.any(resid):
        raise InfeasibleSolution(f"H x != b on {_violated_rows(full, resid)} rows")

    active = full.vars[xi == 1]
    solid = active[active["kind"] != VERTEX_TO_EDGE]
    dashed = active[active["kind"] == VERTEX_TO_EDGE]
    nsv = full.n_source_vertices
    vmap = np.full(nsv, -1, dtype=np.int64)

    # landing positions (layer 0) of every solid step, lowest cycle first
    order = np.lexsort((solid["x_edge"], solid["cycle"]))
    solid = solid[order]
    landings = {}
    for xh, yh in zip(solid["x_head"].tolist(), solid["y_head"].tolist()):
        landings.setdefault(xh, []).append(yh)
    departures = {}
    for xt, yt in zip(solid["x_tail"].tolist(), solid["y_tail"].tolist()):
        departures.setdefault(xt, []).append(yt)

    stretch = {}
    for xv, ys in landings.items():
        vmap[xv] = ys[0]
        seen = set(ys) | set(departures.get(xv, []))
        if len(seen) > 1:
            if full.k == 0:
                raise InconsistentVertexMap(
                    f"source vertex {xv} is assigned to target vertices {sorted(seen)}"
                )
            stretch[xv] = seen
    for xv, yt, yh in zip(dashed["x_tail"].tolist(), dashed["y_tail"].tolist(),
                          dashed["y_head"].tolist()):
        stretch.setdefault(xv, set()).update((yt, yh))
    stretch = {k: sorted(v) for k, v in sorted(stretch.items())}

    em = np.zeros(len(solid), dtype=EDGE_MATCH_DTYPE)
    for name, src in (("x_edge", "x_edge"), ("x_tail", "x_tail"), ("x_head", "x_head"),
                      ("y_tail", "y_tail"), ("y_head", "y_head"), ("layer", "layer_src")):
        em[name] = solid[src]
    em = em[np.argsort(em["x_edge"], kind="stable")]
    m = Matching(vmap, em, len(dashed), stretch)
    if source is not None and target is not None:
        m.certificate = verify_consistency(m, source, target)
    return m


def verify_consistency(matching, source, target):
    """Check that every source edge maps to a target edge (either direction) or a single vertex.

    Vertices listed in ``matching.stretch`` (``k > 0`` solutions with active
    vertex-to-edge steps) map to the whole target path they visit; their edges
    pass when some vertex of one path equals or neighbours some vertex of the
    other. Plain vertex maps are checked pointwise.
    """
    vmap = matching.vertex_map if isinstance(matching, Matching) else np.asarray(matching)
    und = source.mesh.undirected_edges()
    adj = target.adjacency()
    ya, yb = vmap[und[:, 0]], vmap[und[:, 1]]
    matched = (ya >= 0) & (yb >= 0)
    ok = np.ones(len(und), dtype=bool)
    ok[matched] = (ya[matched] == yb[matched]) | np.asarray(adj[ya[matched], yb[matched]]).ravel()
    stretch = getattr(matching, "stretch", None) or {}
    if stretch:
        # a stretched vertex maps to the target path it visits
        for i in np.flatnonzero(matched & ~ok):
            pa = set(stretch.get(int(und[i, 0]), ())) | {int(ya[i])}
            pb = set(stretch.get(int(und[i, 1]), ())) | {int(yb[i])}
            ok[i] = bool(pa & pb) or any(adj[u, w] for u in pa for w in pb)
    bad = np.flatnonzero(matched & ~ok)
    viol = [(int(und[i, 0]), int(und[i, 1]), int(ya[i]), int(yb[i])) for i in bad]
    return ConsistencyReport(viol, int(matched.sum()), int((~matched).sum()))


@dataclass
class OracleResult:
    cost: float
    vertex_map: np.ndarray
    n_consistent: int
    n_total: int


def feature_distance_table(fx, fy, norm="l2"):
    metric = {"l2": "euclidean", "l1": "cityblock", "cosine": "cosine"}[norm]
    d = cdist(fx.rows, fy.rows, metric=metric)
    return np.nan_to_num(d, nan=0.0)


def oracle_enumerate(source, target, fx, fy, norm="l2", limit=10 ** 7):
    """Exhaustive minimum over all neighbourhood-preserving vertex maps.

    Each map is scored with ``sum over directed source edges (x, x') of
    d(f_x, f_phi(x)) + d(f_x', f_phi(x'))``.
    """
    nx, ny = source.n_vertices, target.n_vertices
    total = ny ** nx
    if total > limit:
        raise TooLarge(f"{ny}^{nx} = {total} vertex maps exceeds the enumeration limit {limit}")
    und = np.ascontiguousarray(source.mesh.undirected_edges(), dtype=np.int64)
    dire = np.ascontiguousarray(source.directed_edges, dtype=np.int64)
    adj = target.adjacency().toarray() | np.eye(ny, dtype=bool)
    table = feature_distance_table(fx, fy, norm)
    cost, best, count = _kernels.enumerate_maps(nx, ny, und, dire, adj, table)
    if count == 0:
        return OracleResult(np.inf, None, 0, total)
    return OracleResult(float(cost), np.asarray(best, dtype=np.int64), int(count), total)


def map_cost(vertex_map, source, fx, fy, norm="l2"):
    """Oracle objective of an arbitrary vertex map."""
    table = feature_distance_table(fx, fy, norm)
    e = source.directed_edges
    vm = np.asarray(vertex_map)
    return float(table[e[:, 0], vm[e[:, 0]]].sum() + table[e[:, 1], vm[e[:, 1]]].sum())


def indicator_from_map(vertex_map, system):
    """Full-system 0/1 vector realising ``vertex_map`` with layer-0 solid steps only."""
    full = system.parent if system.reduced else system
    v = full.vars
    vm = np.asarray(vertex_map)
    sel = ((v["kind"] != VERTEX_TO_EDGE) & (v["layer_src"] == 0)
           & (v["y_tail"] == vm[v["x_tail"]]) & (v["y_head"] == vm[v["x_head"]]))
    x = sel.astype(np.int64)
    # a degenerate step must use the self-loop, not a parallel edge id
    deg = sel & (v["kind"] != EDGE_TO_VERTEX) & (v["y_tail"] == v["y_head"])
    x[deg] = 0
    return x


def write_correspondence(path, vertex_map):
    lines = [f"{i} {int(t)}" for i, t in enumerate(vertex_map)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_correspondence(path, n_source=None):
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    n = n_source if n_source is not None else (int(rows[:, 0].max()) + 1 if len(rows) else 0)
    out = np.full(n, -1, dtype=np.int64)
    if len(rows):
        if rows[:, 0].max() >= n:
            raise MatchingError(f"{path}: source index {rows[:, 0].max()} out of range")
        out[rows[:, 0]] = rows[:, 1]
    return out
