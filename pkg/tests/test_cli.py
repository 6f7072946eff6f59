import json
import subprocess
import sys

import numpy as np
import pytest

from cyclematch import shapes
from cyclematch.cli import main
from cyclematch.matching import read_correspondence
from cyclematch.mesh import save_mesh
from cyclematch.solver import read_mps


@pytest.fixture
def meshes(tmp_path):
    out = {}
    for name in ("tetrahedron", "icosahedron", "triangle", "fan4"):
        p = tmp_path / f"{name}.off"
        save_mesh(shapes.BUILTIN[name](), p)
        out[name] = str(p)
    return out


def kv_line(path):
    return dict(tok.split("=", 1) for tok in path.read_text().split())


def test_match_tetra_identity(tmp_path, meshes):
    out = tmp_path / "run"
    code = main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--features", "xyz",
                 "--k", "0", "--out", str(out)])
    assert code == 0
    np.testing.assert_array_equal(read_correspondence(out / "correspondences.txt"), np.arange(4))
    log = kv_line(out / "solver.log")
    assert log["integral"] == "True" and log["status"] == "optimal"
    assert float(log["objective"]) == 0
    assert json.loads((out / "certificate.json").read_text())["consistent"]


def test_odd_k_is_usage_error(meshes, capsys):
    assert main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--k", "3"]) == 1
    assert "even" in capsys.readouterr().err


def test_icosa_k2(tmp_path, meshes):
    out = tmp_path / "ico"
    assert main(["match", meshes["icosahedron"], meshes["icosahedron"], "--k", "2",
                 "--out", str(out)]) == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["consistent"] and cert["violations"] == []


def test_feature_files(tmp_path, meshes, rng):
    fx, fy = tmp_path / "fx.csv", tmp_path / "fy.bin"
    from cyclematch.cost import FeatureTable, save_features
    save_features(FeatureTable(rng.normal(size=(4, 3))), fx)
    save_features(FeatureTable(rng.normal(size=(4, 3))), fy)
    assert main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--features", str(fx),
                 str(fy), "--k", "0", "--out", str(tmp_path / "o"), "--backend", "simplex"]) == 0


def test_bad_feature_args(meshes, tmp_path):
    assert main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--features", "a", "b",
                 "c", "--out", str(tmp_path)]) == 1


def test_missing_file(tmp_path, capsys):
    assert main(["match", str(tmp_path / "nope.off"), "builtin:tetrahedron"]) == 1
    assert "[mesh]" in capsys.readouterr().err


def test_deterministic(tmp_path, meshes):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}"
        main(["match", meshes["icosahedron"], "builtin:sphere60", "--features", "random",
              "--seed", "7", "--k", "0", "--out", str(out)])
        outs.append((out / "correspondences.txt").read_bytes())
    assert outs[0] == outs[1]


def test_eval_and_transfer(tmp_path, meshes):
    out = tmp_path / "m"
    main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--k", "0", "--out", str(out)])
    corr = str(out / "correspondences.txt")
    reports = []
    for i in range(2):
        ev = tmp_path / f"ev{i}"
        assert main(["eval", corr, corr, meshes["tetrahedron"], meshes["tetrahedron"],
                     "--out", str(ev)]) == 0
        reports.append((ev / "report.json").read_bytes())
    assert reports[0] == reports[1]
    assert json.loads(reports[0])["mean_geo_err"] == 0
    assert (tmp_path / "ev0" / "pck.csv").read_text().startswith("threshold,fraction\n")
    ply = tmp_path / "t.ply"
    assert main(["transfer", corr, meshes["tetrahedron"], meshes["tetrahedron"],
                 "--out", str(ply)]) == 0
    assert ply.read_text().startswith("ply")


def test_eval_partial(tmp_path, meshes):
    (tmp_path / "m.txt").write_text("0 0\n1 -1\n2 2\n3 3\n")
    (tmp_path / "gt.txt").write_text("0 0\n1 1\n2 2\n3 3\n")
    assert main(["eval", str(tmp_path / "m.txt"), str(tmp_path / "gt.txt"),
                 meshes["tetrahedron"], meshes["tetrahedron"], "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["n_unmatched"] == 1


def test_eval_missing_ground_truth(tmp_path, meshes, capsys):
    (tmp_path / "m.txt").write_text("0 0\n1 1\n2 2\n3 3\n")
    (tmp_path / "gt.txt").write_text("0 0\n1 1\n")
    assert main(["eval", str(tmp_path / "m.txt"), str(tmp_path / "gt.txt"),
                 meshes["tetrahedron"], meshes["tetrahedron"], "--out", str(tmp_path)]) == 1
    assert "[eval]" in capsys.readouterr().err


class TestPlanar:
    def test_identical_fans(self, tmp_path, meshes):
        out = tmp_path / "p"
        assert main(["planar-match", meshes["fan4"], meshes["fan4"], "--out", str(out)]) == 0
        np.testing.assert_array_equal(read_correspondence(out / "correspondences.txt"),
                                      np.arange(5))

    def test_triangle_into_fan(self, tmp_path, meshes):
        out = tmp_path / "p"
        assert main(["planar-match", meshes["triangle"], meshes["fan4"], "--k", "0",
                     "--out", str(out)]) == 0
        assert json.loads((out / "certificate.json").read_text())["consistent"]

    def test_polygon_rejected(self, tmp_path, capsys):
        p = tmp_path / "q.off"
        p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
        assert main(["planar-match", str(p), str(p)]) == 1
        assert "triangles" in capsys.readouterr().err

    def test_non_planar_rejected(self, meshes):
        assert main(["planar-match", meshes["tetrahedron"], meshes["fan4"]]) == 1


def test_export_mps(tmp_path, meshes):
    path = tmp_path / "t.mps"
    assert main(["export-mps", meshes["tetrahedron"], meshes["tetrahedron"], "--k", "0",
                 "--no-reduce", "--out", str(path)]) == 0
    assert read_mps(path).shape == (156, 192)


def test_oracle(tmp_path, meshes, capsys):
    assert main(["oracle", meshes["tetrahedron"], meshes["tetrahedron"], "--out",
                 str(tmp_path)]) == 0
    assert "256 of 256" in capsys.readouterr().out
    np.testing.assert_array_equal(read_correspondence(tmp_path / "oracle_correspondences.txt"),
                                  np.arange(4))


def test_oracle_too_large(tmp_path, meshes):
    assert main(["oracle", meshes["icosahedron"], meshes["icosahedron"], "--out",
                 str(tmp_path)]) == 1


def test_fallback_exit_code(tmp_path, monkeypatch, meshes):
    import cyclematch.pipeline as pl
    from cyclematch.solver import LpSolution

    real = pl.solve_lp

    def fractional(problem, backend=None, time_limit=None):
        sol = real(problem, backend, time_limit)
        if not problem.lb.any() and problem.ub.all():
            x = sol.x.copy()
            x[np.flatnonzero(x)[0]] = 0.5
            return LpSolution(x, sol.objective, "optimal", False, 1, 0.0, sol.backend)
        return sol

    monkeypatch.setattr(pl, "solve_lp", fractional)
    out = tmp_path / "bb"
    assert main(["match", meshes["tetrahedron"], meshes["tetrahedron"], "--k", "0",
                 "--out", str(out)]) == 2
    assert kv_line(out / "solver.log")["integral"] == "False"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cyclematch", "match", "builtin:tetrahedron",
                        "builtin:tetrahedron", "--k", "0", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "objective=0" in r.stderr
