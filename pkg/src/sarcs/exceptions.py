"""Exception types shared across the package.

Validation failures raise ValueError subclasses so callers can catch broadly;
runtime solver trouble raises RuntimeError subclasses.
"""


class ParameterError(ValueError):
    """A scalar parameter is outside its documented domain."""


class ShapeError(ValueError):
    """An array argument has the wrong shape, dtype, or contains non-finite values."""


class SchemaError(ValueError):
    """Structured input (CSV/JSON rows) does not match the documented schema."""


class ConditioningError(ValueError):
    """A linear system required by a fit or solve is numerically singular."""


class SolverFailure(RuntimeError):
    """An iterative solver stopped without meeting its tolerances.

    Carries the residuals observed at the final iterate so callers can decide
    whether to retry with different settings.
    """

    def __init__(self, message: str, *, feasibility: float = float("nan"),
                 primal: float = float("nan"), dual: float = float("nan"),
                 iterations: int = 0):
        super().__init__(message)
        self.feasibility = feasibility
        self.primal = primal
        self.dual = dual
        self.iterations = iterations


class TrialAborted(RuntimeError):
    """A reconstruction trial could not be completed even after a retry."""


class ExperimentError(RuntimeError):
    """Too many aborted trials for the estimate at this size to be trusted."""
