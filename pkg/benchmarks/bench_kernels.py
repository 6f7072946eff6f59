"""Compare the numba and pure-numpy flavours of the hot kernels.

Each kernel runs on inputs taken from a real matching instance (a 200-face
sphere against a perturbed copy). Numba flavours are warmed up once so
compile time is excluded. ``--end-to-end`` additionally times a full solve with
the embedded simplex under ``CYCLEMATCH_NUMBA=1`` and ``=0`` in subprocesses.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cyclematch import _kernels as K
from cyclematch import shapes
from cyclematch.cost import xyz_features
from cyclematch.eval import edge_graph
from cyclematch.matching import feature_distance_table
from cyclematch.mesh import build_shape_graph
from cyclematch.pipeline import build_system


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    pts = rng.normal(size=(102, 3))
    sphere = shapes.convex_hull_mesh(pts / np.linalg.norm(pts, axis=1)[:, None], "sphere200")
    target = shapes.perturb(sphere, 0.05, rng)
    system, _, _ = build_system(sphere, target, k=0, reduce=False)
    v = system.vars
    fx = np.ascontiguousarray(xyz_features(sphere, True).rows)
    fy = np.ascontiguousarray(xyz_features(target, True).rows)
    idx = [v[f].astype(np.int64) for f in ("x_tail", "x_head", "y_tail", "y_head")]
    cases = {"pair_costs": ((fx, fy, *idx, 0), {})}

    g = edge_graph(target)
    cases["dijkstra"] = ((g.indptr.astype(np.int64), g.indices.astype(np.int64), g.data,
                          np.arange(target.n_vertices, dtype=np.int64)), {})

    a = system.matrix().tocsc()
    c = rng.random(a.shape[1])
    y = rng.normal(size=a.shape[0])
    cases["reduced_costs"] = ((a.indptr.astype(np.int64), a.indices.astype(np.int64),
                               a.data, c, y), {})

    tet, octa = shapes.tetrahedron(), shapes.octahedron()
    gs, gt = build_shape_graph(tet), build_shape_graph(octa)
    ft, fo = xyz_features(tet, True), xyz_features(octa, True)
    cases["enumerate_maps"] = ((tet.n_vertices, octa.n_vertices,
                                np.ascontiguousarray(tet.undirected_edges(), dtype=np.int64),
                                np.ascontiguousarray(gs.directed_edges, dtype=np.int64),
                                gt.adjacency().toarray() | np.eye(octa.n_vertices, dtype=bool),
                                feature_distance_table(ft, fo)), {})
    return cases


END_TO_END = """
import time, numpy as np
from cyclematch import shapes
from cyclematch.cost import xyz_features
from cyclematch.pipeline import run_match
a = shapes.icosahedron(); b = shapes.perturb(a, 0.05, np.random.default_rng(0))
t0 = time.perf_counter()
r = run_match(a, b, xyz_features(a, True), xyz_features(b, True), k=0, backend="simplex")
print(f"{time.perf_counter() - t0:.4f} {r.solution.iterations}")
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    if K.numba is None:
        print("numba not importable; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, (pos, kw) in kernel_cases(rng).items():
        f_np, f_nb = getattr(K, name + "_np"), getattr(K, name + "_nb")
        t_np = best_of(lambda: f_np(*pos, **kw), args.repeat)
        t_nb = best_of(lambda: f_nb(*pos, **kw), args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.1f}x")

    if args.end_to_end:
        for flag in ("1", "0"):
            env = dict(os.environ, CYCLEMATCH_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True,
                                 capture_output=True, text=True).stdout.split()
            print(f"simplex solve icosahedron CYCLEMATCH_NUMBA={flag}: {float(out[0]):.3f} s, "
                  f"{out[1]} pivots")
    return 0


if __name__ == "__main__":
    sys.exit(main())
