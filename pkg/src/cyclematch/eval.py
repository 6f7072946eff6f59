"""Matching quality metrics and colour transfer for inspection."""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from . import _kernels
from .errors import MissingGroundTruth
from .mesh import TriMesh, surface_area, write_ply

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = np.round(np.linspace(0.0, 0.25, 26), 6)


def _vertex_map(phi):
    return np.asarray(getattr(phi, "vertex_map", phi), dtype=np.int64)


def edge_graph(mesh):
    """Symmetric CSR adjacency of ``mesh`` weighted by Euclidean edge length."""
    e = mesh.undirected_edges()
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    n = mesh.n_vertices
    g = sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n)).tocsr()
    g.sort_indices()
    return g


def geodesic_distances(mesh, sources):
    """Graph geodesic distances from each vertex in ``sources`` to all vertices."""
    g = edge_graph(mesh)
    return _kernels.dijkstra(g.indptr.astype(np.int64), g.indices.astype(np.int64),
                             g.data.astype(np.float64), np.asarray(sources, dtype=np.int64))


def geodesic_errors(phi, gt, target):
    """Per-source-vertex geodesic error, normalised by the square root of the target area.

    Parameters
    ----------
    phi : Matching or array_like
        Vertex map, ``-1`` marks unmatched source vertices.
    gt : array_like
        Ground-truth target vertex per source vertex (``-1`` if unknown).
    target : TriMesh

    Returns
    -------
    numpy.ndarray
        Error per source vertex, ``nan`` where ``phi`` is unmatched.

    Raises
    ------
    MissingGroundTruth
        If a matched source vertex has no ground-truth entry.
    """
    vm = _vertex_map(phi)
    gt = np.asarray(gt, dtype=np.int64)
    matched = np.flatnonzero(vm >= 0)
    if len(gt) < len(vm) or np.any(gt[matched] < 0):
        missing = matched[(matched >= len(gt))] if len(gt) < len(vm) else matched[gt[matched] < 0]
        raise MissingGroundTruth(f"no ground truth for {len(missing)} matched source vertices "
                                 f"(first: {int(missing[0])})")
    err = np.full(len(vm), np.nan)
    if len(matched) == 0:
        return err
    srcs, inv = np.unique(gt[matched], return_inverse=True)
    dist = geodesic_distances(target, srcs)
    err[matched] = dist[inv, vm[matched]] / np.sqrt(surface_area(target))
    return err


def pck_curve(errors, thresholds=DEFAULT_THRESHOLDS):
    """Fraction of matched vertices with error at most each threshold."""
    e = np.asarray(errors, dtype=np.float64)
    e = e[np.isfinite(e)]
    t = np.asarray(thresholds, dtype=np.float64)
    if e.size == 0:
        return np.column_stack([t, np.zeros_like(t)])
    frac = np.searchsorted(np.sort(e), t, side="right") / e.size
    return np.column_stack([t, frac])


def cotangent_weights(mesh):
    """Per undirected edge ``(cot a + cot b) / 2`` over the angles opposite the edge."""
    v, f = mesh.vertices, mesh.faces
    und = mesh.undirected_edges()
    key = {(int(a), int(b)): i for i, (a, b) in enumerate(und)}
    w = np.zeros(len(und))
    for k in range(3):
        i, j, o = f[:, k], f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        u, s = v[i] - v[o], v[j] - v[o]
        cross = np.linalg.norm(np.cross(u, s), axis=1)
        cot = np.einsum("ij,ij->i", u, s) / np.where(cross > 0, cross, np.inf)
        for a, b, c in zip(i, j, cot):
            w[key[(min(a, b), max(a, b))]] += 0.5 * c
    return und, w


def dirichlet_energy(phi, source, target, weights="cotan"):
    """Deformation energy of the map induced by ``phi`` on unit-area shapes.

    ``E = sum over source edges (x, x') of w_xx' * |p_phi(x) - p_phi(x')|^2``
    with cotangent weights computed on the unit-area source (default) or unit
    weights (``weights="uniform"``). Edges with an unmatched endpoint are skipped.
    With cotangent weights the identity map of any mesh has energy ``2``.
    """
    vm = _vertex_map(phi)
    p = target.vertices / np.sqrt(surface_area(target))
    if weights == "cotan":
        scaled = TriMesh(source.vertices / np.sqrt(surface_area(source)), source.faces)
        und, w = cotangent_weights(scaled)
    elif weights == "uniform":
        und = source.undirected_edges()
        w = np.ones(len(und))
    else:
        raise ValueError(f"unknown weighting {weights!r}")
    a, b = vm[und[:, 0]], vm[und[:, 1]]
    ok = (a >= 0) & (b >= 0)
    d2 = np.sum((p[a[ok]] - p[b[ok]]) ** 2, axis=1)
    return float(np.sum(w[ok] * d2))


def transfer(phi, source, target, colors=None):
    """Source connectivity placed at the matched target positions.

    Unmatched source vertices keep their own position. Returns the mesh and the
    colour array carried over from ``colors`` (default: a colour map of the
    source coordinates).
    """
    vm = _vertex_map(phi)
    pos = source.vertices.copy()
    m = vm >= 0
    pos[m] = target.vertices[vm[m]]
    if colors is None:
        colors = default_colors(source)
    out = TriMesh(pos, source.faces, name=f"{source.name}_on_{target.name}")
    return out, np.asarray(colors, dtype=np.uint8)


def default_colors(mesh):
    v = mesh.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.rint(255 * (v - lo) / span).astype(np.uint8)


@dataclass
class EvalReport:
    mean_geo_err: float
    per_vertex_geo_err: np.ndarray
    pck_curve: np.ndarray
    dirichlet: float
    collapse_fraction: float
    n_unmatched: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        err = [None if not np.isfinite(e) else round(float(e), 12) for e in self.per_vertex_geo_err]
        return {
            "note": "geodesics on the target edge graph; dirichlet uses cotangent weights on unit-area shapes",
            "mean_geo_err": round(self.mean_geo_err, 12),
            "dirichlet": round(self.dirichlet, 12),
            "collapse_fraction": round(self.collapse_fraction, 12),
            "n_unmatched": self.n_unmatched,
            "per_vertex_geo_err": err,
            "pck_curve": [[float(t), float(f)] for t, f in self.pck_curve],
            **self.extras,
        }

    def write(self, json_path, csv_path=None):
        Path(json_path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["threshold", "fraction"])
                for t, f in self.pck_curve:
                    w.writerow([f"{t:.6g}", f"{f:.6g}"])


def collapse_fraction_of_map(vertex_map, source):
    """Share of matched source edges whose endpoints land on one target vertex."""
    vm = _vertex_map(vertex_map)
    e = source.undirected_edges()
    a, b = vm[e[:, 0]], vm[e[:, 1]]
    ok = (a >= 0) & (b >= 0)
    return float(np.mean(a[ok] == b[ok])) if ok.any() else 0.0


def evaluate(phi, gt, source, target, thresholds=DEFAULT_THRESHOLDS):
    """Assemble an :class:`EvalReport` for ``phi`` against ground truth ``gt``."""
    vm = _vertex_map(phi)
    err = geodesic_errors(vm, gt, target)
    finite = err[np.isfinite(err)]
    collapse = (phi.collapse_fraction if hasattr(phi, "collapse_fraction")
                else collapse_fraction_of_map(vm, source))
    return EvalReport(
        mean_geo_err=float(finite.mean()) if finite.size else 0.0,
        per_vertex_geo_err=err,
        pck_curve=pck_curve(err, thresholds),
        dirichlet=dirichlet_energy(vm, source, target),
        collapse_fraction=float(collapse),
        n_unmatched=int(np.sum(vm < 0)),
    )


def write_transfer(path, phi, source, target, colors=None):
    mesh, cols = transfer(phi, source, target, colors)
    write_ply(mesh, path, colors=cols)
    return mesh
