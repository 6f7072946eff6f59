import dataclasses

import numpy as np
import pytest

from cyclematch import hypergraph as hg
from cyclematch import matching as M
from cyclematch import shapes
from cyclematch.cost import FeatureTable, compute_costs, xyz_features
from cyclematch.errors import (
    FractionalSolution,
    InconsistentVertexMap,
    InfeasibleSolution,
    MatchingError,
    TooLarge,
)
from cyclematch.mesh import build_shape_graph
from cyclematch.pipeline import build_system, run_match
from cyclematch.solver import LpProblem, solve_lp


def solved(src, tgt, fx, fy, k=0, reduce=True, costs=None):
    s, gs, gt = build_system(src, tgt, k, reduce)
    c = compute_costs(fx, fy, s) if costs is None else costs(s)
    return s, gs, gt, solve_lp(LpProblem.from_system(s, c))


class TestDecode:
    @pytest.mark.parametrize("reduce", [False, True])
    def test_identity(self, tetra, reduce):
        f = xyz_features(tetra)
        s, gs, gt, sol = solved(tetra, tetra, f, f, reduce=reduce)
        m = M.decode(sol, s, gs, gt)
        np.testing.assert_array_equal(m.vertex_map, np.arange(4))
        assert m.certificate.ok
        assert len(m.edge_matches) == 12
        np.testing.assert_array_equal(np.sort(m.edge_matches["x_edge"]), np.arange(12))
        assert m.collapse_fraction == 0

    def test_collapse(self, tetra):
        fx = FeatureTable(np.zeros((4, 3)))
        fy = FeatureTable(np.r_[[[0.0, 0, 0]], np.full((3, 3), 5.0)])
        s, gs, gt, sol = solved(tetra, tetra, fx, fy)
        m = M.decode(sol, s, gs, gt)
        np.testing.assert_array_equal(m.vertex_map, 0)
        assert m.collapse_fraction == 1.0
        assert m.certificate.ok

    def test_zero_vector_fails_injectivity(self, tetra):
        s, _, _ = build_system(tetra, tetra, 0, False)
        with pytest.raises(InfeasibleSolution, match="12 injectivity"):
            M.decode(np.zeros(s.n_cols), s)

    def test_fractional(self, tetra):
        s, _, _ = build_system(tetra, tetra, 0, True)
        x = np.zeros(s.n_cols)
        x[0] = 0.5
        with pytest.raises(FractionalSolution):
            M.decode(x, s)

    def test_wrong_length(self, tetra):
        s, _, _ = build_system(tetra, tetra, 0, True)
        with pytest.raises(MatchingError):
            M.decode(np.zeros(3), s)

    def test_reduced_equals_full(self, icosa, rng):
        fx = FeatureTable(rng.normal(size=(12, 3)))
        fy = FeatureTable(rng.normal(size=(12, 3)))
        a = M.decode(*solved(icosa, icosa, fx, fy, reduce=True)[::3][::-1])
        b = M.decode(*solved(icosa, icosa, fx, fy, reduce=False)[::3][::-1])
        np.testing.assert_array_equal(a.vertex_map, b.vertex_map)

    def test_conflicting_assignment_raises(self, tetra):
        # a feasible flow at k = 0 where vertex 0 lands on two different targets
        s, _, _ = build_system(tetra, tetra, 0, False)
        x = M.indicator_from_map(np.arange(4), s)
        ok = M.decode(x, s)
        np.testing.assert_array_equal(ok.vertex_map, np.arange(4))
        v = s.vars
        bad = x.copy()
        # reroute cycle 0 through a rotated copy of its target face
        c0 = (v["cycle"] == 0)
        bad[c0] = 0
        face = tetra.faces[0]
        rot = {face[0]: face[1], face[1]: face[2], face[2]: face[0]}
        for e in range(3):
            a, b = face[e], face[(e + 1) % 3]
            sel = c0 & (v["x_edge"] == e) & (v["y_tail"] == rot[a]) & (v["y_head"] == rot[b])
            bad[np.flatnonzero(sel)[0]] = 1
        # the residual check catches the broken coupling first
        with pytest.raises(InfeasibleSolution):
            M.decode(bad, s)

    def test_inconsistent_vertex_map_is_detected(self, tetra):
        # corrupt the column metadata only, as an assembly bug would
        s, _, _ = build_system(tetra, tetra, 0, False)
        x = M.indicator_from_map(np.arange(4), s)
        vars_ = s.vars.copy()
        j = np.flatnonzero(x)[0]
        vars_["y_head"][j] = (vars_["y_head"][j] + 1) % 4
        with pytest.raises(InconsistentVertexMap):
            M.decode(x, dataclasses.replace(s, vars=vars_))


class TestVerify:
    def test_identity_clean(self, icosa_graph):
        assert M.verify_consistency(np.arange(12), icosa_graph, icosa_graph).ok

    def test_constant_clean(self, icosa_graph):
        assert M.verify_consistency(np.zeros(12, dtype=int), icosa_graph, icosa_graph).ok

    def test_antipodal_remap(self, icosa, icosa_graph):
        d = np.linalg.norm(icosa.vertices - icosa.vertices[0], axis=1)
        anti = int(np.argmax(d))
        phi = np.arange(12)
        phi[0] = anti
        rep = M.verify_consistency(phi, icosa_graph, icosa_graph)
        assert len(rep.violations) == 5
        assert all(0 in v[:2] for v in rep.violations)
        assert rep.to_dict()["consistent"] is False

    def test_unmatched_skipped(self, tetra_graph):
        rep = M.verify_consistency(np.array([-1, 1, 2, 3]), tetra_graph, tetra_graph)
        assert rep.ok
        assert rep.n_skipped == 3 and rep.n_checked == 3


class TestOracle:
    def test_identity_features(self, tetra_graph, tetra):
        f = xyz_features(tetra)
        r = M.oracle_enumerate(tetra_graph, tetra_graph, f, f)
        assert r.cost == 0
        np.testing.assert_array_equal(r.vertex_map, np.arange(4))
        assert r.n_consistent == r.n_total == 256

    def test_triangle_into_tetra(self, tetra_graph, tetra):
        tri = shapes.single_triangle()
        f = FeatureTable(np.zeros((3, 3)))
        r = M.oracle_enumerate(build_shape_graph(tri), tetra_graph, f, xyz_features(tetra))
        assert r.n_total == 64
        assert r.n_consistent == 64

    def test_octahedron_filter(self, rng):
        # opposite octahedron vertices are not adjacent, so some maps are filtered
        o = shapes.octahedron()
        g = build_shape_graph(o)
        t = shapes.tetrahedron()
        f = FeatureTable(rng.normal(size=(4, 3)))
        r = M.oracle_enumerate(build_shape_graph(t), g, f, FeatureTable(rng.normal(size=(6, 3))))
        assert 0 < r.n_consistent < r.n_total
        assert M.verify_consistency(r.vertex_map, build_shape_graph(t), g).ok

    def test_guard(self, icosa_graph):
        f = FeatureTable(np.zeros((12, 3)))
        with pytest.raises(TooLarge):
            M.oracle_enumerate(icosa_graph, icosa_graph, f, f)

    def test_map_cost(self, tetra_graph, rng):
        fx = FeatureTable(rng.normal(size=(4, 3)))
        fy = FeatureTable(rng.normal(size=(4, 3)))
        r = M.oracle_enumerate(tetra_graph, tetra_graph, fx, fy)
        assert M.map_cost(r.vertex_map, tetra_graph, fx, fy) == pytest.approx(r.cost)

    @pytest.mark.parametrize("seed", range(10))
    def test_lp_equals_oracle_at_k0(self, tetra, tetra_graph, seed):
        rng = np.random.default_rng(seed)
        fx = FeatureTable(rng.normal(size=(4, 3)))
        fy = FeatureTable(rng.normal(size=(4, 3)))
        res = run_match(tetra, tetra, fx, fy, k=0)
        o = M.oracle_enumerate(tetra_graph, tetra_graph, fx, fy)
        assert res.solution.integral
        assert res.solution.objective == pytest.approx(o.cost, abs=1e-6)


def test_indicator_from_map_is_feasible(icosa, rng):
    s, _, _ = build_system(icosa, icosa, 2, False)
    for phi in (np.arange(12), np.zeros(12, dtype=int)):
        x = M.indicator_from_map(phi, s)
        assert not s.residual(x).any()
        np.testing.assert_array_equal(M.decode(x, s).vertex_map, phi)


def test_stretch_path_consistency():
    # vertex-to-edge steps forced by negative costs; the path-aware check still passes
    a, b = shapes.octahedron(), shapes.icosahedron()
    s, gs, gt = build_system(a, b, k=2)
    c = compute_costs(xyz_features(a, True), xyz_features(b, True), s)
    dashed = s.parent.vars["kind"] == hg.VERTEX_TO_EDGE
    c[np.bincount(s.merge_map, weights=dashed, minlength=s.n_cols) > 0] -= 5.0
    from cyclematch.solver import solve_ilp_branch_and_bound
    sol = solve_ilp_branch_and_bound(LpProblem.from_system(s, c))
    m = M.decode(sol, s, gs, gt)
    assert m.n_vertex_to_edge > 0
    assert m.stretch
    assert m.certificate.ok


def test_correspondence_round_trip(tmp_path):
    phi = np.array([3, -1, 0, 2])
    M.write_correspondence(tmp_path / "c.txt", phi)
    assert (tmp_path / "c.txt").read_text().splitlines()[1] == "1 -1"
    np.testing.assert_array_equal(M.read_correspondence(tmp_path / "c.txt"), phi)


def test_correspondence_sparse_lines(tmp_path):
    (tmp_path / "c.txt").write_text("2 5\n0 1\n")
    np.testing.assert_array_equal(M.read_correspondence(tmp_path / "c.txt", 4), [1, -1, 5, -1])
    with pytest.raises(MatchingError):
        M.read_correspondence(tmp_path / "c.txt", 2)
