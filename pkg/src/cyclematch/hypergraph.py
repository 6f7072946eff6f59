"""Coupled product-graph constraint system ``H x = b`` and its reduced form.

Column layout
-------------
Let ``T`` be the number of extended target edges (directed target edges,
reversed copies of target boundary edges, then one self-loop per target
vertex), ``V`` the number of target vertices and ``k`` the distortion bound.

* solid column for source edge ``e``, source layer ``l`` and target edge ``t``:
  ``(e * (k + 1) + l) * T + t``
* dashed column (``k > 0`` only) for cycle-vertex ``v = 3 * cycle + slot``,
  layer ``l < k`` and non-loop target edge ``h``:
  ``3n (k + 1) T + (v * k + l) * (T - V) + h``

Row layout
----------
flow rows ``(v * (k + 1) + l) * V + y``, then coupling rows
``(r * (k + 1) + l) * T + t`` for opposite pair ``r``, then one injectivity row
per source edge. For ``k = 0`` this is exactly ``P = diag(C_i+ (x) Y+ - C_i- (x) Y-)``,
``L = K+ (x) I - K- (x) I~`` and ``S = I (x) 1^T``.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import io as spio
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ConstraintError, DimensionMismatch, EmptyTarget, OddDistortion

logger = logging.getLogger(__name__)

EDGE_TO_EDGE, EDGE_TO_VERTEX, VERTEX_TO_EDGE = 0, 1, 2
FLOW, COUPLING, INJECTIVITY = 0, 1, 2

VAR_DTYPE = np.dtype([
    ("kind", np.int8), ("cycle", np.int32), ("x_edge", np.int32),
    ("x_tail", np.int32), ("x_head", np.int32),
    ("y_edge", np.int32), ("y_tail", np.int32), ("y_head", np.int32),
    ("layer_src", np.int8), ("layer_dst", np.int8),
])
ROW_DTYPE = np.dtype([("kind", np.int8), ("a", np.int32), ("b", np.int32),
                      ("c", np.int32), ("d", np.int32)])


@dataclass(frozen=True, eq=False)
class TargetEdges:
    """Extended target edge set with its opposite-edge permutation."""

    tail: np.ndarray
    head: np.ndarray
    opposite: np.ndarray
    n_vertices: int

    @property
    def n_total(self):
        return len(self.tail)

    @property
    def n_nonloop(self):
        return self.n_total - self.n_vertices

    def permutation_matrix(self):
        """The opposite-edge permutation as a signed sparse matrix (all ``-1``)."""
        t = self.n_total
        return sparse.csr_matrix((-np.ones(t), (np.arange(t), self.opposite)), shape=(t, t))

    def incidence_split(self):
        """``(Y~+, Y~-)``: head (+1) and tail (-1) incidence including self-loops."""
        t, v = self.n_total, self.n_vertices
        cols = np.arange(t)
        plus = sparse.csr_matrix((np.ones(t), (self.head, cols)), shape=(v, t))
        minus = sparse.csr_matrix((-np.ones(t), (self.tail, cols)), shape=(v, t))
        return plus, minus


def target_edges(graph):
    """Halfedges, reversed boundary halfedges, then self-loops ``(y, y)``."""
    de = graph.directed_edges
    ne, nv = len(de), graph.n_vertices
    bnd = np.flatnonzero(graph.boundary)
    nb = len(bnd)
    tail = np.concatenate([de[:, 0], de[bnd, 1], np.arange(nv)])
    head = np.concatenate([de[:, 1], de[bnd, 0], np.arange(nv)])
    opp = np.empty(ne + nb + nv, dtype=np.int64)
    opp[:ne] = graph.opposite
    opp[bnd] = ne + np.arange(nb)
    opp[ne:ne + nb] = bnd
    opp[ne + nb:] = np.arange(ne + nb, ne + nb + nv)
    return TargetEdges(tail.astype(np.int64), head.astype(np.int64), opp, nv)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Sparse ``{-1, 0, +1}`` system in triplet form with per-row/column metadata.

    ``vars`` and ``row_meta`` are structured arrays (see ``VAR_DTYPE`` and
    ``ROW_DTYPE``). For a reduced system ``vars`` holds the lowest-index
    pre-image of each merged column, ``merge_map`` maps every full column to
    its reduced column and ``parent`` is the full system.
    """

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    n_rows: int
    n_cols: int
    b: np.ndarray
    vars: np.ndarray
    row_meta: np.ndarray
    k: int
    n_source_vertices: int
    n_target_vertices: int
    n_flow: int
    n_coupling: int
    n_injectivity: int
    reduced: bool = False
    merge_map: np.ndarray = None
    parent: "ConstraintSystem" = field(default=None, repr=False)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def matrix(self, dtype=np.float64):
        return sparse.csr_matrix(
            (self.vals.astype(dtype), (self.rows, self.cols)), shape=self.shape
        )

    def residual(self, x):
        """``H x - b`` in exact integer arithmetic for an integral ``x``."""
        x = np.asarray(x)
        xi = np.rint(x).astype(np.int64)
        if x.shape != (self.n_cols,):
            raise DimensionMismatch(f"x has shape {x.shape}, system has {self.n_cols} columns")
        hx = np.zeros(self.n_rows, dtype=np.int64)
        np.add.at(hx, self.rows, self.vals.astype(np.int64) * xi[self.cols])
        return hx - self.b.astype(np.int64)

    def summary(self):
        return {
            "rows": self.n_rows, "cols": self.n_cols, "nnz": int(len(self.vals)),
            "flow_rows": self.n_flow, "coupling_rows": self.n_coupling,
            "injectivity_rows": self.n_injectivity, "k": self.k, "reduced": self.reduced,
        }

    def write(self, stem):
        """Export ``<stem>.mtx`` (H), ``<stem>.b.txt`` and ``<stem>.meta.json``."""
        stem = Path(stem)
        spio.mmwrite(str(stem.with_suffix(".mtx")),
                     sparse.coo_matrix((self.vals.astype(np.int64), (self.rows, self.cols)),
                                       shape=self.shape),
                     field="integer", symmetry="general")
        np.savetxt(stem.with_suffix(".b.txt"), self.b, fmt="%d")
        meta = {
            "summary": self.summary(),
            "vars": {name: self.vars[name].tolist() for name in VAR_DTYPE.names},
            "rows": {name: self.row_meta[name].tolist() for name in ROW_DTYPE.names},
        }
        if self.reduced:
            meta["merge_map"] = self.merge_map.tolist()
        stem.with_suffix(".meta.json").write_text(json.dumps(meta))


def expected_counts(n_cycles, n_pairs, n_target_vertices, n_target_edges_ext, k):
    """Closed-form ``(flow, coupling, injectivity, columns)`` of the full system."""
    v, t = n_target_vertices, n_target_edges_ext
    flow = 3 * n_cycles * (k + 1) * v
    coupling = n_pairs * (k + 1) * t
    injectivity = 3 * n_cycles
    cols = 3 * n_cycles * (k + 1) * t + 3 * n_cycles * k * (t - v)
    return flow, coupling, injectivity, cols


def build_product_system(coll, target, k=0, source=None):
    """Assemble the full coupled system for source cycles ``coll`` against ``target``.

    Parameters
    ----------
    coll : SurfaceCycleCollection
    target : ShapeGraph
    k : int
        Distortion bound; must be an even non-negative integer.
    source : ShapeGraph, optional
        Only used for the source vertex count (defaults to ``max index + 1``).
    """
    if not isinstance(k, (int, np.integer)) or k < 0 or k % 2:
        raise OddDistortion(f"distortion bound must be an even non-negative integer, got {k!r}")
    k = int(k)
    if target.n_vertices == 0:
        raise EmptyTarget("target shape has no vertices")
    n = coll.n
    if n == 0:
        raise ConstraintError("source shape has no faces")

    te = target_edges(target)
    T, V, Ep = te.n_total, te.n_vertices, te.n_nonloop
    L1 = k + 1
    faces = np.array([c.vertices for c in coll.cycles], dtype=np.int64)
    nsv = source.n_vertices if source is not None else int(faces.max()) + 1
    p = coll.p
    n_flow, n_coup, n_inj, n_cols = expected_counts(n, p, V, T, k)
    base_l, base_s = n_flow, n_flow + n_coup
    n_rows = base_s + n_inj

    # ---- solid columns: (edge, layer, target edge)
    e_ids = np.arange(3 * n)
    cyc, slot = e_ids // 3, e_ids % 3
    nxt = (slot + 1) % 3
    E, Lr, Tt = np.meshgrid(e_ids, np.arange(L1), np.arange(T), indexing="ij")
    E, Lr, Tt = E.ravel(), Lr.ravel(), Tt.ravel()
    n_solid = len(E)
    col_s = np.arange(n_solid)
    tail_row = ((3 * cyc[E] + slot[E]) * L1 + Lr) * V + te.tail[Tt]
    head_row = ((3 * cyc[E] + nxt[E]) * L1) * V + te.head[Tt]
    inj_row = base_s + E

    side = np.full(3 * n, -1, dtype=np.int64)
    pair_of = np.full(3 * n, -1, dtype=np.int64)
    if p:
        side[coll.opposite_pairs[:, 0]] = 0
        side[coll.opposite_pairs[:, 1]] = 1
        pair_of[coll.opposite_pairs[:, 0]] = np.arange(p)
        pair_of[coll.opposite_pairs[:, 1]] = np.arange(p)
    coupled = pair_of[E] >= 0
    t_row = np.where(side[E] == 0, Tt, te.opposite[Tt])
    coup_row = base_l + (pair_of[E] * L1 + Lr) * T + t_row

    rows = [tail_row, head_row, inj_row, coup_row[coupled]]
    cols = [col_s, col_s, col_s, col_s[coupled]]
    vals = [np.full(n_solid, -1), np.full(n_solid, 1), np.full(n_solid, 1),
            np.where(side[E[coupled]] == 0, 1, -1)]

    svars = np.zeros(n_solid, dtype=VAR_DTYPE)
    svars["kind"] = np.where(Tt >= Ep, EDGE_TO_VERTEX, EDGE_TO_EDGE)
    svars["cycle"] = cyc[E]
    svars["x_edge"] = E
    svars["x_tail"] = faces[cyc[E], slot[E]]
    svars["x_head"] = faces[cyc[E], nxt[E]]
    svars["y_edge"] = Tt
    svars["y_tail"] = te.tail[Tt]
    svars["y_head"] = te.head[Tt]
    svars["layer_src"] = Lr
    svars["layer_dst"] = 0
    var_blocks = [svars]

    # ---- dashed columns: (cycle vertex, layer, non-loop target edge)
    if k > 0:
        Vv, Ld, Hh = np.meshgrid(np.arange(3 * n), np.arange(k), np.arange(Ep), indexing="ij")
        Vv, Ld, Hh = Vv.ravel(), Ld.ravel(), Hh.ravel()
        col_d = n_solid + np.arange(len(Vv))
        rows += [(Vv * L1 + Ld) * V + te.tail[Hh], (Vv * L1 + Ld + 1) * V + te.head[Hh]]
        cols += [col_d, col_d]
        vals += [np.full(len(Vv), -1), np.full(len(Vv), 1)]
        dvars = np.zeros(len(Vv), dtype=VAR_DTYPE)
        dvars["kind"] = VERTEX_TO_EDGE
        dvars["cycle"] = Vv // 3
        dvars["x_edge"] = -1
        dvars["x_tail"] = dvars["x_head"] = faces[Vv // 3, Vv % 3]
        dvars["y_edge"] = Hh
        dvars["y_tail"] = te.tail[Hh]
        dvars["y_head"] = te.head[Hh]
        dvars["layer_src"] = Ld
        dvars["layer_dst"] = Ld + 1
        var_blocks.append(dvars)

    rows = np.concatenate(rows).astype(np.int32)
    cols = np.concatenate(cols).astype(np.int32)
    vals = np.concatenate(vals).astype(np.int8)
    order = np.lexsort((rows, cols))
    rows, cols, vals = rows[order], cols[order], vals[order]

    rmeta = np.zeros(n_rows, dtype=ROW_DTYPE)
    fv, fl, fy = np.meshgrid(np.arange(3 * n), np.arange(L1), np.arange(V), indexing="ij")
    rmeta["kind"][:n_flow] = FLOW
    rmeta["a"][:n_flow] = (fv // 3).ravel()
    rmeta["b"][:n_flow] = faces[fv // 3, fv % 3].ravel()
    rmeta["c"][:n_flow] = fy.ravel()
    rmeta["d"][:n_flow] = fl.ravel()
    if p:
        pr, pl, pt = np.meshgrid(np.arange(p), np.arange(L1), np.arange(T), indexing="ij")
        rmeta["kind"][base_l:base_s] = COUPLING
        rmeta["a"][base_l:base_s] = pr.ravel()
        rmeta["b"][base_l:base_s] = pt.ravel()
        rmeta["c"][base_l:base_s] = pl.ravel()
    rmeta["kind"][base_s:] = INJECTIVITY
    rmeta["a"][base_s:] = np.arange(n_inj)

    b = np.zeros(n_rows, dtype=np.int8)
    b[base_s:] = 1
    allvars = np.concatenate(var_blocks)
    assert len(allvars) == n_cols
    logger.debug("built system rows=%d cols=%d nnz=%d k=%d", n_rows, n_cols, len(vals), k)
    return ConstraintSystem(rows, cols, vals, n_rows, n_cols, b, allvars, rmeta, k,
                            nsv, V, n_flow, n_coup, n_inj)


def coupling_pairs(system):
    """``(plus_col, minus_col)`` per coupling row of a full system."""
    is_c = system.row_meta["kind"][system.rows] == COUPLING
    r, c, v = system.rows[is_c], system.cols[is_c], system.vals[is_c]
    order = np.lexsort((-v, r))
    r, c = r[order], c[order]
    if len(r) % 2 or (len(r) and not np.array_equal(r[0::2], r[1::2])):
        raise ConstraintError("coupling rows must have exactly two entries")
    return np.column_stack([c[0::2], c[1::2]]).reshape(-1, 2)


def reduce_system(full):
    """Eliminate coupling rows by merging each coupled column pair into one column."""
    if full.reduced:
        raise ConstraintError("system is already reduced")
    pairs = coupling_pairs(full)
    n = full.n_cols
    g = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = csgraph.connected_components(g, directed=False)
    first = np.full(labels.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n))
    rank = np.empty_like(first)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    merge_map = rank[labels]
    n_red = len(first)

    keep_row = full.row_meta["kind"] != COUPLING
    new_row = np.cumsum(keep_row) - 1
    mask = keep_row[full.rows]
    h = sparse.coo_matrix(
        (full.vals[mask].astype(np.int64), (new_row[full.rows[mask]], merge_map[full.cols[mask]])),
        shape=(int(keep_row.sum()), n_red),
    ).tocsc()
    h.sum_duplicates()
    h.eliminate_zeros()
    h = h.tocoo()
    order = np.lexsort((h.row, h.col))
    rep = np.sort(first)
    return replace(
        full,
        rows=h.row[order].astype(np.int32), cols=h.col[order].astype(np.int32),
        vals=h.data[order].astype(np.int8), n_rows=h.shape[0], n_cols=n_red,
        b=full.b[keep_row], vars=full.vars[rep], row_meta=full.row_meta[keep_row],
        n_coupling=0, reduced=True, merge_map=merge_map, parent=full,
    )


def expand_solution(reduced_x, merge_map):
    """Lift a reduced-system vector to the full system (coupled entries equal)."""
    reduced_x = np.asarray(reduced_x)
    merge_map = np.asarray(merge_map)
    if reduced_x.ndim != 1 or len(reduced_x) != int(merge_map.max()) + 1:
        raise DimensionMismatch(
            f"reduced vector has length {reduced_x.shape}, merge map expects {int(merge_map.max()) + 1}"
        )
    return reduced_x[merge_map]


def kronecker_blocks(coll, target):
    """Reference ``k = 0`` blocks ``(P, L, S)`` built literally with Kronecker products.

    Kept independent of :func:`build_product_system` so tests can compare the
    two assemblies entry by entry.
    """
    te = target_edges(target)
    yp, ym = te.incidence_split()
    c = sparse.csr_matrix(np.array([[-1, 0, 1], [1, -1, 0], [0, 1, -1]]))
    cp, cm = c.maximum(0), c.minimum(0)
    pi = sparse.kron(cp, yp) - sparse.kron(cm, ym)
    P = sparse.block_diag([pi] * coll.n)
    K = sparse.csr_matrix(coll.pairing_matrix().astype(np.float64)) \
        if coll.p else sparse.csr_matrix((0, 3 * coll.n))
    I_t = sparse.identity(te.n_total)
    L = sparse.kron(K.maximum(0), I_t) - sparse.kron(K.minimum(0), te.permutation_matrix())
    S = sparse.kron(sparse.identity(3 * coll.n), np.ones((1, te.n_total)))
    return P.tocsr(), L.tocsr(), S.tocsr()
