"""Exception hierarchy.

Every error carries the name of the pipeline stage that raised it so the CLI
can print module-tagged messages.
"""


class CycleMatchError(Exception):
    module = "core"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class MeshError(CycleMatchError, ValueError):
    module = "mesh"


class ParseError(MeshError):
    pass


class NotTriangulated(ParseError):
    pass


class NonManifold(MeshError):
    pass


class InconsistentOrientation(MeshError):
    pass


class MultiComponent(MeshError):
    pass


class ConstraintError(CycleMatchError, ValueError):
    module = "hypergraph"


class OddDistortion(ConstraintError):
    pass


class EmptyTarget(ConstraintError):
    pass


class DimensionMismatch(CycleMatchError, ValueError):
    module = "core"


class FeatureError(CycleMatchError, ValueError):
    module = "cost"


class RowCountMismatch(FeatureError):
    pass


class NonFiniteEntry(FeatureError):
    pass


class SolverError(CycleMatchError, RuntimeError):
    module = "solver"


class BackendUnavailable(SolverError):
    pass


class NumericalFailure(SolverError):
    pass


class NodeLimitExceeded(SolverError):
    pass


class MatchingError(CycleMatchError, ValueError):
    module = "matching"


class FractionalSolution(MatchingError):
    pass


class InfeasibleSolution(MatchingError):
    pass


class InconsistentVertexMap(MatchingError):
    pass


class TooLarge(MatchingError):
    pass


class MissingGroundTruth(CycleMatchError, ValueError):
    module = "eval"
