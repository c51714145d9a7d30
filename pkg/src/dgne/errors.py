"""Exception hierarchy.

Every error raised deliberately by the library derives from :class:`DGNEError`,
and most also derive from the closest builtin (``ValueError``,
``ArithmeticError``, ...) so generic handlers keep working.
"""


class DGNEError(Exception):
    """Base class for all library errors."""


# graph / weights
class DisconnectedGraph(DGNEError, ValueError):
    pass


class NonSymmetric(DGNEError, ValueError):
    pass


class InvalidWeights(DGNEError, ValueError):
    pass


class NotPSD(DGNEError, ValueError):
    pass


class RankThresholdAmbiguous(DGNEError, ValueError):
    pass


# games
class DimensionMismatch(DGNEError, ValueError):
    pass


class NotStronglyMonotone(DGNEError, ValueError):
    pass


class SingularBlock(DGNEError, ValueError):
    pass


# solver
class NonFinite(DGNEError, ArithmeticError):
    """Iterates blew up; usually the stepsizes are far too large.

    ``trajectory`` holds the records collected before the failure.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InconsistentKKT(DGNEError, ValueError):
    pass


class RangeSpaceMiss(DGNEError, ValueError):
    pass


class WeightNotPD(DGNEError, ValueError):
    pass


# theory
class DegenerateSigma(DGNEError, ValueError):
    """The consensus gap is zero, so the beta bound certifies nothing."""


# oracle
class MaxIterExceeded(DGNEError, RuntimeError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class MultiplierInconsistent(DGNEError, ValueError):
    pass


# experiments
class InsufficientData(DGNEError, ValueError):
    pass


class EmptySeries(DGNEError, ValueError):
    pass
