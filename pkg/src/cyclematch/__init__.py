"""Globally consistent shape matching by surface-cycle matching as an integer linear program."""

__version__ = "0.1.0"

from .cost import FeatureTable, compute_costs, load_features, xyz_features
from .cycles import SurfaceCycleCollection, decompose
from .errors import CycleMatchError
from .eval import EvalReport, dirichlet_energy, evaluate, geodesic_errors, pck_curve
from .hypergraph import ConstraintSystem, build_product_system, expand_solution, reduce_system
from .matching import Matching, decode, oracle_enumerate, verify_consistency
from .mesh import ShapeGraph, TriMesh, build_shape_graph, load_mesh, save_mesh
from .pipeline import MatchResult, build_system, run_match

__all__ = [
    "ConstraintSystem", "CycleMatchError", "EvalReport", "FeatureTable", "MatchResult",
    "Matching", "ShapeGraph", "SurfaceCycleCollection", "TriMesh", "build_product_system",
    "build_shape_graph", "build_system", "compute_costs", "decode", "decompose",
    "dirichlet_energy", "evaluate", "expand_solution", "geodesic_errors", "load_features",
    "load_mesh", "oracle_enumerate", "pck_curve", "reduce_system", "run_match", "save_mesh",
    "verify_consistency", "xyz_features",
]
