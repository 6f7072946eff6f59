"""Per-triangle surface cycles and the opposite-edge pairing between them."""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SurfaceCycle:
    cycle_id: int
    vertices: tuple
    edges: tuple


@dataclass(frozen=True, eq=False)
class SurfaceCycleCollection:
    """One closed 3-cycle per source face plus the cross-cycle edge pairing.

    Attributes
    ----------
    cycles : list of SurfaceCycle
        Cycle ``i`` is face ``i`` with its stored winding.
    opposite_pairs : numpy.ndarray, shape (p, 2)
        Directed-edge ids ``(a, b)`` with ``b == -a`` and ``a < b``, sorted by ``a``.
        Row ``r`` is row ``r`` of the pairing matrix with ``+1`` at ``a`` and
        ``-1`` at ``b``.
    boundary_edges : numpy.ndarray
        Directed-edge ids without a partner, ascending.
    """

    cycles: list
    opposite_pairs: np.ndarray
    boundary_edges: np.ndarray

    @property
    def n(self):
        return len(self.cycles)

    @property
    def p(self):
        return len(self.opposite_pairs)

    @staticmethod
    def slot(edge_id):
        """``(cycle, slot)`` location of a directed edge id."""
        return divmod(int(edge_id), 3)

    def pairing_matrix(self):
        """The ``p x 3n`` signed incidence of opposite edges (dense, for inspection)."""
        k = np.zeros((self.p, 3 * self.n), dtype=np.int8)
        r = np.arange(self.p)
        k[r, self.opposite_pairs[:, 0]] = 1
        k[r, self.opposite_pairs[:, 1]] = -1
        return k

    def to_json(self):
        return json.dumps({
            "cycles": [{"id": c.cycle_id, "vertices": list(c.vertices), "edges": list(c.edges)}
                       for c in self.cycles],
            "opposite_pairs": [
                {"edge_a": list(self.slot(a)), "edge_b": list(self.slot(b))}
                for a, b in self.opposite_pairs.tolist()
            ],
            "boundary_edges": [list(self.slot(e)) for e in self.boundary_edges.tolist()],
        }, indent=1)


def decompose(graph):
    """Split the source shape graph into its per-triangle surface cycles."""
    faces = graph.mesh.faces
    cycles = [
        SurfaceCycle(i, tuple(int(v) for v in faces[i]), (3 * i, 3 * i + 1, 3 * i + 2))
        for i in range(len(faces))
    ]
    ids = np.arange(graph.n_edges)
    first = (graph.opposite >= 0) & (ids < graph.opposite)
    pairs = np.column_stack([ids[first], graph.opposite[first]]).astype(np.int64).reshape(-1, 2)
    return SurfaceCycleCollection(cycles, pairs, np.flatnonzero(graph.boundary))


def check_collection(coll, graph):
    """List violations of closure, disjointness and opposite coverage (empty when valid)."""
    problems = []
    owner = {}
    edges = graph.directed_edges
    for c in coll.cycles:
        es = list(c.edges)
        if len(es) < 3 or any(e < 0 or e >= graph.n_edges for e in es):
            problems.append(f"cycle {c.cycle_id}: not closed (edges {es})")
            continue
        for t in range(len(es)):
            if edges[es[t], 1] != edges[es[(t + 1) % len(es)], 0]:
                problems.append(f"cycle {c.cycle_id}: not closed at slot {t}")
                break
        tails = [int(edges[e, 0]) for e in es]
        if len(set(tails)) != len(tails) or set(tails) != set(c.vertices):
            problems.append(f"cycle {c.cycle_id}: vertex degree is not one-in/one-out")
        for e in es:
            if e in owner:
                problems.append(f"edge {e} shared by cycles {owner[e]} and {c.cycle_id}")
            else:
                owner[e] = c.cycle_id
    for e, cid in sorted(owner.items()):
        o = int(graph.opposite[e])
        if o >= 0 and o not in owner:
            problems.append(f"edge {e} of cycle {cid}: opposite edge {o} not covered")
    pairs = {tuple(p) for p in coll.opposite_pairs.tolist()}
    expected = {(e, int(graph.opposite[e])) for e in range(graph.n_edges)
                if 0 <= e < graph.opposite[e]}
    if pairs != expected:
        problems.append(f"opposite pairing mismatch: {len(pairs ^ expected)} pairs differ")
    return problems
