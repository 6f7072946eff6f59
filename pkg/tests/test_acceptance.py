"""Acceptance criteria, one test per criterion at the pinned tolerances."""

import time

import numpy as np
import pytest

from cyclematch import shapes
from cyclematch.cost import FeatureTable, compute_costs, xyz_features
from cyclematch.eval import dirichlet_energy, geodesic_errors
from cyclematch.hypergraph import expand_solution
from cyclematch.matching import oracle_enumerate, verify_consistency
from cyclematch.mesh import TriMesh, build_shape_graph, surface_area
from cyclematch.pipeline import build_system, run_match
from cyclematch.solver import LpProblem, solve_lp

OBJ_TOL = 1e-9
EQ_TOL = 1e-6

SMALL = (shapes.tetrahedron, shapes.octahedron, shapes.icosahedron, shapes.pentakis_sphere)


def test_1_system_shape(acceptance):
    t0 = time.perf_counter()
    tet = shapes.tetrahedron()
    full, _, _ = build_system(tet, tet, k=0, reduce=False)
    red, _, _ = build_system(tet, tet, k=0, reduce=True)
    dt = time.perf_counter() - t0
    ok = (full.shape == (156, 192) and int(full.b.sum()) == 12
          and set(np.unique(full.b)) <= {0, 1} and red.shape == (60, 96) and dt < 1.0)
    acceptance(1, ok, f"full {full.shape} b ones {int(full.b.sum())}, reduced {red.shape}, "
                      f"{dt:.3f} s")


@pytest.mark.parametrize("make", [shapes.tetrahedron, shapes.icosahedron,
                                  shapes.pentakis_sphere])
@pytest.mark.parametrize("k", [0, 2])
def test_2_identity(acceptance, make, k):
    mesh = make()
    t0 = time.perf_counter()
    f = xyz_features(mesh)
    r = run_match(mesh, mesh, f, f, k=k)
    dt = time.perf_counter() - t0
    m = r.matching
    ok = (r.solution.integral and not r.used_branch_and_bound
          and abs(r.solution.objective) <= OBJ_TOL
          and np.array_equal(m.vertex_map, np.arange(mesh.n_vertices))
          and m.certificate.ok and dt < 10.0)
    acceptance(2, ok, f"{mesh.name} ({mesh.n_faces} faces) k={k}: objective "
                      f"{r.solution.objective:.3g}, integral {r.solution.integral}, "
                      f"{len(m.certificate.violations)} violations, {dt:.2f} s")


def test_3_oracle(acceptance):
    tet = shapes.tetrahedron()
    gs = build_shape_graph(tet)
    gaps, integral = [], []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        fx = FeatureTable(rng.normal(size=(4, 3)))
        fy = FeatureTable(rng.normal(size=(4, 3)))
        r = run_match(tet, tet, fx, fy, k=0)
        oracle = oracle_enumerate(gs, gs, fx, fy)
        gaps.append(abs(r.solution.objective - oracle.cost))
        integral.append(r.solution.integral and not r.used_branch_and_bound)
    ok = max(gaps) <= EQ_TOL and all(integral)
    acceptance(3, ok, f"10 seeds, max |LP - oracle| {max(gaps):.2e}, "
                      f"{sum(integral)}/10 integral")


def test_4_reduction(acceptance):
    rng = np.random.default_rng(4)
    gaps, exact = [], []
    for i in range(10):
        src = shapes.perturb(SMALL[i % 4](), 0.05, rng)
        tgt = shapes.perturb(SMALL[(i + 1) % 4](), 0.05, rng)
        k = 2 * (i % 2) if max(src.n_faces, tgt.n_faces) <= 20 else 0
        fx = FeatureTable(rng.normal(size=(src.n_vertices, 3)))
        fy = FeatureTable(rng.normal(size=(tgt.n_vertices, 3)))
        red, _, _ = build_system(src, tgt, k=k, reduce=True)
        full = red.parent
        s_full = solve_lp(LpProblem.from_system(full, compute_costs(fx, fy, full)))
        s_red = solve_lp(LpProblem.from_system(red, compute_costs(fx, fy, red)))
        gaps.append(abs(s_full.objective - s_red.objective))
        x = expand_solution(np.rint(s_red.x).astype(np.int64), red.merge_map)
        exact.append(s_red.integral and not np.any(full.residual(x)))
    ok = max(gaps) <= EQ_TOL and all(exact)
    acceptance(4, ok, f"10 instances, max |full - reduced| {max(gaps):.2e}, "
                      f"{sum(exact)}/10 expanded optima satisfy Hx=b exactly")


def _corruptions(vertex_map, source, target):
    """Every ``(x, y)`` with ``y`` neither equal nor adjacent to the image of some neighbour of ``x``."""
    adj = target.adjacency().tocsr()
    out = []
    for a, b in source.mesh.undirected_edges():
        for x, nb in ((a, b), (b, a)):
            img = vertex_map[nb]
            far = np.setdiff1d(np.arange(target.n_vertices),
                               np.r_[img, adj.indices[adj.indptr[img]:adj.indptr[img + 1]]])
            if far.size:
                out.append((int(x), int(far[0])))
    return sorted(set(out))


def test_5_consistency_property(acceptance):
    rng = np.random.default_rng(5)
    clean, n_corrupt, n_detected = 0, 0, 0
    for i in range(20):
        base = SMALL[i % 4]()
        src = shapes.perturb(base, 0.05, rng)
        perm = rng.permutation(base.n_vertices) if i % 2 else np.arange(base.n_vertices)
        tgt = shapes.permute_vertices(shapes.perturb(base, 0.05, rng), perm)
        fx = rng.normal(size=(base.n_vertices, 4))
        fy = np.empty_like(fx)
        fy[perm] = fx + rng.normal(scale=0.1, size=fx.shape)
        r = run_match(src, tgt, FeatureTable(fx), FeatureTable(fy), k=2)
        m = r.matching
        gs, gt = build_shape_graph(src), build_shape_graph(tgt)
        clean += verify_consistency(m, gs, gt).ok and m.certificate.ok
        for x, y in _corruptions(m.vertex_map, gs, gt):
            bad = m.vertex_map.copy()
            bad[x] = y
            n_corrupt += 1
            n_detected += not verify_consistency(bad, gs, gt).ok
    ok = clean == 20 and n_detected == n_corrupt and n_corrupt > 0
    acceptance(5, ok, f"{clean}/20 decoded matchings clean, {n_detected}/{n_corrupt} "
                      f"single-entry corruptions flagged")


def test_6_partiality(acceptance):
    rng = np.random.default_rng(6)
    results = []
    for i in range(10):
        base = (shapes.icosahedron, shapes.pentakis_sphere, shapes.octahedron)[i % 3]()
        drop = rng.choice(base.n_faces, 1 + i % 5, replace=False)
        src, kept = shapes.remove_faces(base, drop)
        gs = build_shape_graph(src)
        for k in (0, 2):
            r = run_match(src, base, xyz_features(src), xyz_features(base), k=k)
            cert = r.matching.certificate
            results.append(r.solution.status == "optimal" and cert.ok
                           and cert.n_checked + cert.n_skipped == len(src.undirected_edges())
                           and np.array_equal(r.matching.vertex_map, kept)
                           and bool(gs.boundary.any()))
    ok = all(results)
    acceptance(6, ok, f"{sum(results)}/{len(results)} partial instances (1-5 faces removed, "
                      f"k in 0,2) decoded with a clean certificate over all remaining edges")


@pytest.mark.parametrize("k", [0, 2])
def test_7_collapse(acceptance, k):
    src, tgt = shapes.icosahedron(), shapes.pentakis_sphere()
    fy = np.full((tgt.n_vertices, 3), 10.0)
    fy[7] = 0.0
    r = run_match(src, tgt, FeatureTable(np.zeros((src.n_vertices, 3))), FeatureTable(fy), k=k)
    m = r.matching
    ok = (set(m.vertex_map.tolist()) == {7} and m.certificate.ok
          and m.collapse_fraction == 1.0 and abs(r.solution.objective) <= OBJ_TOL)
    acceptance(7, ok, f"k={k}: image {sorted(set(m.vertex_map.tolist()))}, collapse_fraction "
                      f"{m.collapse_fraction}, {len(m.certificate.violations)} violations")


def test_8_metrics(acceptance):
    tet = shapes.tetrahedron()
    unit = TriMesh(tet.vertices / np.sqrt(surface_area(tet)), tet.faces)
    ident = np.arange(4)
    geo = float(np.nanmax(geodesic_errors(ident, ident, tet)))
    const = dirichlet_energy(np.zeros(4, dtype=np.int64), tet, tet)
    e_id = dirichlet_energy(ident, unit, unit)
    ok = geo == 0.0 and const == 0.0 and abs(e_id - 2.0) <= OBJ_TOL
    acceptance(8, ok, f"identity geodesic error {geo}, constant-map energy {const}, "
                      f"identity energy {e_id:.12f}")


@pytest.mark.parametrize("k", [0, 2])
def test_9_scaling(acceptance, k):
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(102, 3))
    sphere = shapes.convex_hull_mesh(pts / np.linalg.norm(pts, axis=1)[:, None], "sphere200")
    tgt = shapes.perturb(sphere, 0.05, rng)
    t0 = time.perf_counter()
    r = run_match(sphere, tgt, xyz_features(sphere, True), xyz_features(tgt, True), k=k)
    dt = time.perf_counter() - t0
    ok = sphere.n_faces == 200 and r.solution.status == "optimal" and dt < 300.0
    acceptance(9, ok, f"200-face pair k={k}: {r.system.n_rows}x{r.system.n_cols} reduced, "
                      f"integral {r.solution.integral}, {len(r.matching.certificate.violations)} "
                      f"violations, build+solve {dt:.1f} s")
