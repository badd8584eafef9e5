"""Exception hierarchy shared by all tpil modules."""


class TpilError(Exception):
    """Base class for every error raised by this package."""


class InvalidParam(TpilError, ValueError):
    pass


class CapacityError(TpilError, ValueError):
    "Raised when a grid world cannot hold the requested objects."


class DimensionMismatch(TpilError, ValueError):
    pass


class SingularSystem(TpilError, ArithmeticError):
    pass


class DegenerateStack(TpilError, ValueError):
    "Raised when the stacked perspective matrix is identically zero."


class NoObservations(TpilError, ValueError):
    "Raised when feature matching is asked to run before any perspective was observed."


class SolverError(TpilError, RuntimeError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class IterationLimit(SolverError):
    pass


class ConfigError(TpilError, ValueError):
    pass


class IoError(TpilError, OSError):
    "Raised when results cannot be written; the message names the path."


class ExperimentFailed(TpilError, RuntimeError):
    """A seed raised during an experiment. ``result`` holds the partial results."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
