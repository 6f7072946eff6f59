"""Small built-in meshes and instance perturbations used by tests and the CLI."""

import numpy as np
from scipy.spatial import ConvexHull

from .mesh import TriMesh


def convex_hull_mesh(points, name="hull"):
    """Outward-oriented triangulated convex hull of ``points``."""
    points = np.asarray(points, dtype=np.float64)
    hull = ConvexHull(points)
    faces = hull.simplices.copy()
    centre = points.mean(axis=0)
    p = points[faces]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", normal, p[:, 0] - centre) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return TriMesh(points, faces[np.lexsort(faces.T[::-1])], name)


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length."""
    v = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, np.sqrt(3) / 2, 0.0],
        [0.5, np.sqrt(3) / 6, np.sqrt(2.0 / 3.0)],
    ]) * edge
    f = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]]
    return TriMesh(v, f, "tetrahedron")


def octahedron():
    v = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    return convex_hull_mesh(v, "octahedron")


def icosahedron():
    t = (1 + np.sqrt(5)) / 2
    v = []
    for a in (-1, 1):
        for b in (-t, t):
            v += [[0, a, b], [a, b, 0], [b, 0, a]]
    v = np.array(v, dtype=np.float64)
    return convex_hull_mesh(v / np.linalg.norm(v[0]), "icosahedron")


def pentakis_sphere():
    """60-face sphere: icosahedron split at face centres, projected to the unit sphere."""
    ico = icosahedron()
    centres = ico.vertices[ico.faces].mean(axis=1)
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    verts = np.vstack([ico.vertices, centres])
    faces = []
    for i, (a, b, c) in enumerate(ico.faces):
        m = 12 + i
        faces += [[a, b, m], [b, c, m], [c, a, m]]
    return TriMesh(verts, faces, "sphere60")


def planar_grid(nx, ny, spacing=1.0):
    """Triangulated ``nx`` x ``ny`` vertex grid in the z = 0 plane, counter-clockwise."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
    v = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            faces += [[a, a + 1, a + nx + 1], [a, a + nx + 1, a + nx]]
    return TriMesh(v, faces, f"grid{nx}x{ny}")


def planar_fan(n_outer=4, radius=1.0):
    """Centre vertex surrounded by ``n_outer`` rim vertices (``n_outer + 1`` points)."""
    ang = 2 * np.pi * np.arange(n_outer) / n_outer
    v = np.vstack([[0.0, 0.0, 0.0], np.column_stack([radius * np.cos(ang), radius * np.sin(ang), 0 * ang])])
    f = [[0, 1 + i, 1 + (i + 1) % n_outer] for i in range(n_outer)]
    return TriMesh(v, f, f"fan{n_outer}")


def single_triangle():
    return TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], "triangle")


def single_vertex():
    return TriMesh(np.zeros((1, 3)), np.zeros((0, 3), dtype=np.int64), "point")


BUILTIN = {
    "tetrahedron": tetrahedron,
    "octahedron": octahedron,
    "icosahedron": icosahedron,
    "sphere60": pentakis_sphere,
    "triangle": single_triangle,
    "fan4": planar_fan,
    "grid3": lambda: planar_grid(3, 3),
}


def perturb(mesh, scale, rng):
    """Jitter vertex positions by Gaussian noise of std ``scale`` (relative to mean edge length)."""
    e = mesh.undirected_edges()
    h = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1).mean()
    return mesh.with_vertices(mesh.vertices + rng.normal(scale=scale * h, size=mesh.vertices.shape))


def permute_vertices(mesh, perm):
    """Relabel so new vertex ``perm[i]`` is old vertex ``i``; returns the new mesh."""
    perm = np.asarray(perm)
    v = np.empty_like(mesh.vertices)
    v[perm] = mesh.vertices
    return TriMesh(v, perm[mesh.faces], mesh.name)


def remove_faces(mesh, drop):
    """Delete faces and any vertices left unreferenced.

    Returns
    -------
    TriMesh
        The reduced mesh.
    numpy.ndarray
        For every kept vertex its index in the original mesh.
    """
    keep = np.ones(mesh.n_faces, dtype=bool)
    keep[np.asarray(drop, dtype=np.int64)] = False
    faces = mesh.faces[keep]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[faces], f"{mesh.name}-partial"), used
