"""Exception taxonomy.

ModelError means the input model is invalid (CLI exit code 2).
ConsistencyError means an internal theorem-backed check failed, which
signals a bug in the engine or a broken input assumption (CLI exit code 3).
QueryError means an operation was called with unusable arguments.
"""


class MetachainError(Exception):
    pass


class ModelError(MetachainError):
    pass


class QueryError(MetachainError):
    pass


class ConsistencyError(MetachainError):
    pass


# -- model validation -------------------------------------------------------

class NotIrreducible(ModelError):
    pass


class AsymmetricSupport(ModelError):
    pass


class EmptyScaleBasis(ModelError):
    pass


class NotReversible(ModelError):
    pass


class NegativeRateOrder(ModelError):
    pass


class NoOrderZeroRate(ModelError):
    pass


class InvalidField(ModelError):
    pass


class StateSpaceTooLarge(ModelError):
    pass


class NonPositiveRate(ModelError):
    pass


class Underflow(ModelError):
    pass


# -- operation arguments ----------------------------------------------------

class StateNotKept(QueryError):
    pass


class TooFewStates(QueryError):
    pass


class EmptySubset(QueryError):
    pass


class FullSet(QueryError):
    pass


class OverlappingSets(QueryError):
    pass


class Disconnected(QueryError):
    pass


class NotInOmegaO(QueryError):
    pass


class NotApplicable(QueryError):
    pass


# -- internal consistency ----------------------------------------------------

class HarmonicInconsistency(ConsistencyError):
    pass


class StartDependentHitting(ConsistencyError):
    pass


class CrossCheckMismatch(ConsistencyError):
    pass


class DepthNotDiverging(ConsistencyError):
    pass
