"""Per-vertex feature tables and the variable cost vector."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, FeatureError, NonFiniteEntry, RowCountMismatch
from .mesh import surface_area


@dataclass(frozen=True, eq=False)
class FeatureTable:
    rows: np.ndarray

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if not np.all(np.isfinite(r)):
            bad = np.argwhere(~np.isfinite(r))[0]
            raise NonFiniteEntry(f"non-finite feature at row {bad[0]}, column {bad[1]}")
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return len(self.rows)


def _read_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FeatureError(f"{path}: binary feature file shorter than its header")
    n, d = struct.unpack("<II", raw[:8])
    body = np.frombuffer(raw, dtype="<f4", offset=8)
    if body.size != n * d:
        raise FeatureError(f"{path}: header says {n}x{d}, body holds {body.size} values")
    return body.reshape(n, d).astype(np.float64)


def load_features(path, mesh=None):
    """Read a feature file: ``.bin`` (float32 with ``<u4 rows, <u4 dim`` header), CSV or whitespace text."""
    path = Path(path)
    if path.suffix == ".bin":
        data = _read_binary(path)
    else:
        text = path.read_text()
        delim = "," if "," in text.split("\n", 1)[0] else None
        try:
            data = np.loadtxt(path, delimiter=delim, ndmin=2)
        except ValueError as exc:
            raise FeatureError(f"{path}: {exc}") from None
    if mesh is not None and len(data) != mesh.n_vertices:
        raise RowCountMismatch(f"{path}: {len(data)} rows for a mesh with {mesh.n_vertices} vertices")
    return FeatureTable(data)


def save_features(table, path):
    path = Path(path)
    if path.suffix == ".bin":
        rows = np.ascontiguousarray(table.rows, dtype="<f4")
        path.write_bytes(struct.pack("<II", *rows.shape) + rows.tobytes())
    else:
        delim = "," if path.suffix == ".csv" else " "
        np.savetxt(path, table.rows, delimiter=delim, fmt="%.17g")


def xyz_features(mesh, normalize=False):
    """Vertex coordinates as features, optionally centred and scaled to unit area."""
    v = mesh.vertices.copy()
    if normalize:
        v -= v.mean(axis=0)
        area = surface_area(mesh) if mesh.n_faces else 0.0
        if area > 0:
            v /= np.sqrt(area)
    return FeatureTable(v)


def compute_costs(fx, fy, system, norm="l2"):
    """Cost per column of ``system``.

    A variable pairing source endpoints ``(x, x')`` with target endpoints
    ``(y, y')`` costs ``d(f_x, f_y) + d(f_x', f_y')``. Self-loop targets use
    ``y' = y`` and vertex-to-edge variables ``x' = x``. Columns of a reduced
    system cost the sum over their merged pre-images.
    """
    if fx.dim != fy.dim:
        raise DimensionMismatch(f"feature dimensions differ: {fx.dim} vs {fy.dim}")
    if norm not in _kernels.NORMS:
        raise FeatureError(f"unknown norm {norm!r}; expected one of {sorted(_kernels.NORMS)}")
    full = system.parent if system.reduced else system
    v = full.vars
    if len(fx) <= v["x_tail"].max(initial=0) or len(fy) <= v["y_tail"].max(initial=0):
        raise RowCountMismatch("feature table shorter than the mesh it is paired with")
    c = _kernels.pair_costs(
        np.ascontiguousarray(fx.rows), np.ascontiguousarray(fy.rows),
        v["x_tail"].astype(np.int64), v["x_head"].astype(np.int64),
        v["y_tail"].astype(np.int64), v["y_head"].astype(np.int64), _kernels.NORMS[norm],
    )
    if system.reduced:
        c = np.bincount(system.merge_map, weights=c, minlength=system.n_cols)
    return c
