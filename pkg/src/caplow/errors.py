"""Exception hierarchy shared by every caplow module."""


class CaplowError(Exception):
    """Base class for all library errors."""


# orlicz
class NonPositiveArgument(CaplowError, ValueError):
    pass


class OutOfTableRange(CaplowError, ValueError):
    pass


class DivergentAntiderivative(CaplowError, ValueError):
    pass


class ExponentOutOfRange(CaplowError, ValueError):
    pass


class EmptyMeasure(CaplowError, ValueError):
    pass


# geometry
class GridTooCoarse(CaplowError, ValueError):
    pass


class NonConvex(CaplowError, ValueError):
    pass


# plaplace
class MeshFailure(CaplowError, RuntimeError):
    pass


class NoConvergence(CaplowError, RuntimeError):
    pass


# flow / solver
class StepFailure(CaplowError, RuntimeError):
    pass


class ProbeInsideBody(CaplowError, ValueError):
    pass


class NotConverged(CaplowError, RuntimeError):
    """Raised when a flow run ends without meeting the residual tolerance.

    The full trajectory is attached so callers can inspect what happened.
    """

    def __init__(self, message, trajectory=None, status=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.status = status


class PhiMismatch(CaplowError, ValueError):
    pass


# cli
class ParseError(CaplowError, ValueError):
    pass


class ValidationError(CaplowError, ValueError):
    pass
