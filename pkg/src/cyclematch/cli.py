"""Command-line interface.

Exit codes: ``0`` integral LP optimum, ``2`` optimum found by the branch and
bound fallback after a fractional relaxation, ``1`` any error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cost import FeatureTable, compute_costs, load_features, xyz_features
from .errors import CycleMatchError, NotTriangulated, OddDistortion, ParseError
from .eval import evaluate, write_transfer
from .matching import oracle_enumerate, read_correspondence, write_correspondence
from .mesh import build_shape_graph, load_mesh
from .pipeline import build_system, run_match
from .shapes import BUILTIN
from .solver import BACKENDS, LpProblem, default_backend, export_mps

logger = logging.getLogger("cyclematch")

EXIT_OK, EXIT_ERROR, EXIT_FALLBACK = 0, 1, 2


def kv(**fields):
    """Single-line ``key=value`` record."""
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.12g}"
        return str(v).replace(" ", "_")
    return " ".join(f"{k}={fmt(v)}" for k, v in fields.items())


def resolve_mesh(text):
    """Mesh from a file path or ``builtin:<name>``."""
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN:
            raise ParseError(f"unknown builtin mesh {name!r}; choose from {', '.join(sorted(BUILTIN))}")
        return BUILTIN[name]()
    return load_mesh(text)


def resolve_features(args, source, target):
    feats = args.features
    if feats == ["xyz"]:
        return xyz_features(source, normalize=True), xyz_features(target, normalize=True)
    if feats == ["random"]:
        rng = np.random.default_rng(args.seed)
        return (FeatureTable(rng.normal(size=(source.n_vertices, 3))),
                FeatureTable(rng.normal(size=(target.n_vertices, 3))))
    if len(feats) != 2:
        raise ParseError("--features takes 'xyz', 'random' or two feature file paths")
    return load_features(feats[0], source), load_features(feats[1], target)


def _even_k(text):
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if k < 0 or k % 2:
        raise argparse.ArgumentTypeError(f"k must be even and non-negative, got {k}")
    return k


def _add_problem_args(p, with_solver=True):
    p.add_argument("source", help="source mesh (.off/.ply or builtin:<name>)")
    p.add_argument("target", help="target mesh (.off/.ply or builtin:<name>)")
    p.add_argument("--features", nargs="+", default=["xyz"], metavar="F",
                   help="'xyz' (default), 'random', or source and target feature files")
    p.add_argument("--norm", choices=("l2", "l1", "cosine"), default="l2")
    p.add_argument("--seed", type=int, default=0, help="seed for --features random")
    if with_solver:
        p.add_argument("--k", type=_even_k, default=2, help="distortion bound (even, default 2)")
        p.add_argument("--no-reduce", dest="reduce", action="store_false",
                       help="solve the unreduced system")
        p.add_argument("--backend", choices=BACKENDS, default=None,
                       help="LP backend (default from CYCLEMATCH_BACKEND or highs)")
        p.add_argument("--node-limit", type=int, default=10_000)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="cyclematch", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match two triangle meshes")
    _add_problem_args(p)
    p = sub.add_parser("planar-match", help="match two triangulated planar graphs (z = 0)")
    _add_problem_args(p)

    p = sub.add_parser("eval", help="score a correspondence file against ground truth")
    p.add_argument("matching")
    p.add_argument("ground_truth")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("transfer", help="write source connectivity on matched target positions")
    p.add_argument("matching")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out", type=Path, default=Path("transfer.ply"), help="output PLY path")

    p = sub.add_parser("export-mps", help="write the LP relaxation in MPS format")
    _add_problem_args(p)
    p.set_defaults(backend=None)

    p = sub.add_parser("oracle", help="brute-force minimum over consistent vertex maps")
    _add_problem_args(p, with_solver=False)
    p.add_argument("--limit", type=int, default=10 ** 7)
    return ap


def cmd_match(args, planar=False):
    source, target = resolve_mesh(args.source), resolve_mesh(args.target)
    if planar:
        for m in (source, target):
            if np.any(m.vertices[:, 2] != 0):
                raise NotTriangulated(f"{m.name}: planar input needs z = 0 for every vertex")
    fx, fy = resolve_features(args, source, target)
    backend = args.backend or default_backend()
    res = run_match(source, target, fx, fy, k=args.k, reduce=args.reduce, backend=backend,
                    norm=args.norm, node_limit=args.node_limit)
    sol, m, sysm = res.solution, res.matching, res.system
    args.out.mkdir(parents=True, exist_ok=True)
    write_correspondence(args.out / "correspondences.txt", m.vertex_map)
    record = dict(
        command="planar-match" if planar else "match", source=source.name, target=target.name,
        k=args.k, reduced=sysm.reduced, rows=sysm.n_rows, cols=sysm.n_cols, backend=backend,
        status=sol.status, objective=sol.objective, integral=not res.used_branch_and_bound,
        iterations=sol.iterations, branches=sol.branches, runtime=sol.runtime,
        build_time=res.timings["build"], consistent=m.certificate.ok,
        collapse_fraction=m.collapse_fraction, unmatched=int(m.partial_flags.sum()),
        vertex_to_edge=m.n_vertex_to_edge,
    )
    line = kv(**record)
    (args.out / "solver.log").write_text(line + "\n")
    cert = m.certificate.to_dict()
    cert["stretched_vertices"] = {str(k): v for k, v in m.stretch.items()}
    (args.out / "certificate.json").write_text(json.dumps(cert, indent=2, sort_keys=True) + "\n")
    logger.info(line)
    print(f"matched {source.name} -> {target.name}: objective {sol.objective:.6g}, "
          f"{'integral' if not res.used_branch_and_bound else 'branch and bound'}, "
          f"{len(cert['violations'])} consistency violations; wrote {args.out}")
    return EXIT_FALLBACK if res.used_branch_and_bound else EXIT_OK


def cmd_eval(args):
    source, target = resolve_mesh(args.source), resolve_mesh(args.target)
    phi = read_correspondence(args.matching, source.n_vertices)
    gt = read_correspondence(args.ground_truth, source.n_vertices)
    report = evaluate(phi, gt, source, target)
    args.out.mkdir(parents=True, exist_ok=True)
    report.write(args.out / "report.json", args.out / "pck.csv")
    logger.info(kv(command="eval", mean_geo_err=report.mean_geo_err, dirichlet=report.dirichlet,
                   collapse_fraction=report.collapse_fraction, unmatched=report.n_unmatched))
    print(f"mean geodesic error {report.mean_geo_err:.6g}, dirichlet {report.dirichlet:.6g}, "
          f"{report.n_unmatched} unmatched; wrote {args.out}")
    return EXIT_OK


def cmd_transfer(args):
    source, target = resolve_mesh(args.source), resolve_mesh(args.target)
    phi = read_correspondence(args.matching, source.n_vertices)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_transfer(args.out, phi, source, target)
    logger.info(kv(command="transfer", out=args.out))
    return EXIT_OK


def cmd_export_mps(args):
    source, target = resolve_mesh(args.source), resolve_mesh(args.target)
    fx, fy = resolve_features(args, source, target)
    system, _, _ = build_system(source, target, args.k, args.reduce)
    problem = LpProblem.from_system(system, compute_costs(fx, fy, system, args.norm))
    path = args.out if args.out.suffix == ".mps" else args.out / "problem.mps"
    path.parent.mkdir(parents=True, exist_ok=True)
    export_mps(problem, path)
    logger.info(kv(command="export-mps", rows=system.n_rows, cols=system.n_cols, out=path))
    print(f"wrote {path} ({system.n_rows} rows, {system.n_cols} columns)")
    return EXIT_OK


def cmd_oracle(args):
    source, target = resolve_mesh(args.source), resolve_mesh(args.target)
    fx, fy = resolve_features(args, source, target)
    res = oracle_enumerate(build_shape_graph(source), build_shape_graph(target), fx, fy,
                           args.norm, args.limit)
    args.out.mkdir(parents=True, exist_ok=True)
    if res.vertex_map is not None:
        write_correspondence(args.out / "oracle_correspondences.txt", res.vertex_map)
    logger.info(kv(command="oracle", cost=res.cost, consistent_maps=res.n_consistent,
                   total_maps=res.n_total))
    print(f"oracle minimum {res.cost:.9g} over {res.n_consistent} of {res.n_total} maps")
    return EXIT_OK


COMMANDS = {
    "match": cmd_match,
    "planar-match": lambda a: cmd_match(a, planar=True),
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "export-mps": cmd_export_mps,
    "oracle": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for the fallback path
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (CycleMatchError, OSError) as exc:
        if isinstance(exc, OddDistortion):
            parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
