"""Triangle meshes, their directed shape graphs, and OFF/PLY file I/O."""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import (
    InconsistentOrientation,
    MeshError,
    MultiComponent,
    NonManifold,
    NotTriangulated,
    ParseError,
)

logger = logging.getLogger(__name__)


class DegenerateFaceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Vertices plus consistently oriented triangles.

    Parameters
    ----------
    vertices : array_like, shape (nv, 3)
        Vertex positions. 2D input is padded with ``z = 0``.
    faces : array_like, shape (nf, 3)
        Vertex-index triples. Winding must be consistent across the mesh.
    name : str
        Free-form label used in logs and reports.

    Notes
    -----
    Construction validates the mesh and raises on repeated vertices in a face,
    edges shared by more than two faces, inconsistent winding, and more than
    one connected component. Position-identical vertices are allowed since
    identity is index based.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = "mesh"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise ParseError(f"{self.name}: vertices must have shape (n, 3), got {v.shape}")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        _validate(v, f, self.name)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def undirected_edges(self):
        """Sorted unique undirected edges as an ``(ne, 2)`` array with ``u < v``."""
        if self.n_faces == 0:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self):
        return self.n_vertices - len(self.undirected_edges()) + self.n_faces

    def is_closed(self):
        return 2 * len(self.undirected_edges()) == 3 * self.n_faces

    def with_vertices(self, vertices, name=None):
        """Same connectivity, new positions."""
        return TriMesh(vertices, self.faces, name or self.name)


def _validate(v, f, name):
    nv = len(v)
    if not np.all(np.isfinite(v)):
        raise ParseError(f"{name}: non-finite vertex coordinate")
    if len(f) == 0:
        if nv > 1:
            raise MultiComponent(f"{name}: {nv} isolated vertices without faces")
        return
    if f.min() < 0 or f.max() >= nv:
        raise ParseError(f"{name}: face index out of range [0, {nv})")
    bad = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonManifold(f"{name}: face {i} {tuple(f[i])} repeats a vertex")

    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    _, inv, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    if counts.max() > 2:
        e = und[np.flatnonzero(counts[inv.ravel()] > 2)[0]]
        raise NonManifold(f"{name}: edge {tuple(e)} borders more than two faces")
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if dcounts.max() > 1:
        dup = np.unique(directed, axis=0)[np.flatnonzero(dcounts > 1)[0]]
        raise InconsistentOrientation(
            f"{name}: edge {tuple(dup)} is traversed twice in the same direction"
        )

    used = np.zeros(nv, dtype=bool)
    used[f.ravel()] = True
    if not used.all():
        raise MultiComponent(f"{name}: {int((~used).sum())} vertices are not referenced by any face")
    adj = sparse.coo_matrix(
        (np.ones(len(directed)), (directed[:, 0], directed[:, 1])), shape=(nv, nv)
    )
    n_comp, _ = sparse.csgraph.connected_components(adj, directed=False)
    if n_comp > 1:
        raise MultiComponent(f"{name}: mesh has {n_comp} connected components")


@dataclass(frozen=True, eq=False)
class ShapeGraph:
    """Directed halfedge graph of a triangle mesh.

    Edge ``3 * f + k`` runs from ``faces[f, k]`` to ``faces[f, (k + 1) % 3]``.
    ``opposite[e]`` is the id of the reversed edge or ``-1`` on the boundary.
    """

    mesh: TriMesh
    directed_edges: np.ndarray
    opposite: np.ndarray
    boundary: np.ndarray
    out_offsets: np.ndarray
    out_edges: np.ndarray
    _lookup: dict = field(repr=False, default_factory=dict)

    @property
    def n_vertices(self):
        return self.mesh.n_vertices

    @property
    def n_edges(self):
        return len(self.directed_edges)

    @property
    def extended_edge_count(self):
        return self.n_edges + self.n_vertices

    @property
    def n_opposite_pairs(self):
        return int((self.opposite >= 0).sum()) // 2

    def edge_id(self, u, v):
        """Id of directed edge ``(u, v)`` or ``-1``."""
        return self._lookup.get((int(u), int(v)), -1)

    def outgoing(self, v):
        return self.out_edges[self.out_offsets[v]:self.out_offsets[v + 1]]

    def adjacency(self):
        """Symmetric boolean adjacency as CSR."""
        n = self.n_vertices
        e = self.directed_edges
        a = sparse.coo_matrix((np.ones(len(e), dtype=bool), (e[:, 0], e[:, 1])), shape=(n, n))
        a = (a + a.T).tocsr()
        a.data[:] = True
        return a


def build_shape_graph(mesh):
    f = mesh.faces
    nf = len(f)
    edges = np.empty((3 * nf, 2), dtype=np.int64)
    for k in range(3):
        edges[k::3, 0] = f[:, k]
        edges[k::3, 1] = f[:, (k + 1) % 3]
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    opposite = np.array([lookup.get((int(b), int(a)), -1) for a, b in edges], dtype=np.int64)
    boundary = opposite < 0
    order = np.argsort(edges[:, 0], kind="stable")
    offsets = np.zeros(mesh.n_vertices + 1, dtype=np.int64)
    np.add.at(offsets, edges[:, 0] + 1, 1)
    offsets = np.cumsum(offsets)
    for arr in (edges, opposite, boundary, order, offsets):
        arr.setflags(write=False)
    return ShapeGraph(mesh, edges, opposite, boundary, offsets, order, lookup)


def face_areas(mesh):
    if mesh.n_faces == 0:
        return np.zeros(0)
    p = mesh.vertices[mesh.faces]
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def surface_area(mesh):
    """Total area; zero-area triangles contribute 0 and trigger a warning."""
    a = face_areas(mesh)
    if (a <= 0).any():
        warnings.warn(
            f"{mesh.name}: {int((a <= 0).sum())} degenerate faces", DegenerateFaceWarning, stacklevel=2
        )
    return float(a.sum())


# --------------------------------------------------------------------------- I/O


def _data_lines(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def _faces_from_rows(rows, name):
    faces = []
    for i, row in enumerate(rows):
        n = int(row[0])
        if n != 3:
            raise NotTriangulated(f"{name}: face {i} has {n} vertices, only triangles are supported")
        if len(row) < 4:
            raise ParseError(f"{name}: face {i} is truncated")
        faces.append([int(t) for t in row[1:4]])
    return np.array(faces, dtype=np.int64).reshape(-1, 3)


def read_off(path, name=None):
    path = Path(path)
    name = name or path.stem
    lines = _data_lines(path.read_text())
    try:
        header = next(lines)
        if not header.startswith("OFF"):
            raise ParseError(f"{name}: missing OFF header")
        rest = header[3:].split()
        counts = rest if rest else next(lines).split()
        nv, nf = int(counts[0]), int(counts[1])
        verts = [[float(t) for t in next(lines).split()[:3]] for _ in range(nv)]
        rows = [next(lines).split() for _ in range(nf)]
    except StopIteration:
        raise ParseError(f"{name}: unexpected end of file") from None
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{name}: {exc}") from None
    try:
        faces = _faces_from_rows(rows, name)
    except MeshError:
        raise
    except ValueError as exc:
        raise ParseError(f"{name}: {exc}") from None
    return TriMesh(np.array(verts).reshape(-1, 3), faces, name)


def _coord_writer(digits):
    """Shortest round-trip repr by default, so float64 coordinates survive exactly."""
    if digits is None:
        return lambda c: repr(float(c))
    return lambda c: f"{c:.{digits}g}"


def write_off(mesh, path, digits=None):
    fmt = _coord_writer(digits)
    out = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    out += [" ".join(fmt(c) for c in p) for p in mesh.vertices]
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(out) + "\n")


def read_ply(path, name=None, return_colors=False):
    """ASCII PLY with a vertex element (x y z [red green blue]) and a face list."""
    path = Path(path)
    name = name or path.stem
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{name}: missing ply magic")
    elements = []
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError(f"{name}: header not terminated")
        tok = lines[i].split()
        i += 1
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(f"{name}: only ascii PLY is supported, got {tok[1]}")
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError(f"{name}: property before element")
            elements[-1][2].append(tok[-1])
        elif tok[0] == "end_header":
            break
    verts, colors, faces = None, None, np.zeros((0, 3), dtype=np.int64)
    try:
        for el, count, props in elements:
            body = [lines[i + j].split() for j in range(count)]
            i += count
            if el == "vertex":
                cols = {p: k for k, p in enumerate(props)}
                arr = np.array(body, dtype=np.float64).reshape(count, len(props))
                verts = arr[:, [cols["x"], cols["y"], cols["z"]]]
                if all(c in cols for c in ("red", "green", "blue")):
                    colors = arr[:, [cols["red"], cols["green"], cols["blue"]]].astype(np.uint8)
            elif el == "face":
                faces = _faces_from_rows(body, name)
    except MeshError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise ParseError(f"{name}: malformed PLY body ({exc})") from None
    if verts is None:
        raise ParseError(f"{name}: no vertex element")
    mesh = TriMesh(verts, faces, name)
    return (mesh, colors) if return_colors else mesh


def write_ply(mesh, path, colors=None, digits=None):
    fmt = _coord_writer(digits)
    ftype = "double" if digits is None or digits > 9 else "float"
    head = ["ply", "format ascii 1.0", f"element vertex {mesh.n_vertices}",
            f"property {ftype} x", f"property {ftype} y", f"property {ftype} z"]
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8).reshape(mesh.n_vertices, 3)
        head += ["property uchar red", "property uchar green", "property uchar blue"]
    head += [f"element face {mesh.n_faces}", "property list uchar int vertex_indices", "end_header"]
    body = []
    for k, p in enumerate(mesh.vertices):
        row = " ".join(fmt(c) for c in p)
        if colors is not None:
            row += " " + " ".join(str(int(c)) for c in colors[k])
        body.append(row)
    body += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(head + body) + "\n")


def load_mesh(path, format=None):
    """Read an OFF or ASCII PLY triangle mesh; ``format`` defaults to the suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    if fmt == "off":
        return read_off(path)
    if fmt == "ply":
        return read_ply(path)
    raise ParseError(f"{path}: unknown mesh format {fmt!r}")


def save_mesh(mesh, path, format=None, colors=None):
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "off":
        write_off(mesh, path)
    elif fmt == "ply":
        write_ply(mesh, path, colors=colors)
    else:
        raise ParseError(f"{path}: unknown mesh format {fmt!r}")


def check_genus_match(source, target):
    """Warn when Euler characteristics differ; returns True on match."""
    cx, cy = source.euler_characteristic(), target.euler_characteristic()
    if source.is_closed() and target.is_closed() and cx != cy:
        logger.warning("euler characteristic mismatch: %s=%d %s=%d", source.name, cx, target.name, cy)
        return False
    return True
