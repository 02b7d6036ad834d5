"""Exception hierarchy shared by the model, solvers, engine and simulator."""

from typing import Any, List, Optional


class OffloadingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OffloadingError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(OffloadingError):
    """A queue would be unstable (arrival rate at or above service rate)."""


class SolverError(OffloadingError):
    """A root bracket is invalid or bisection failed."""


class ScenarioError(OffloadingError):
    """A scenario file could not be parsed or validated."""


class NonConvergenceError(OffloadingError):
    """The best-response iteration hit its sweep limit."""

    def __init__(self, message: str, trace: Optional[List[Any]] = None, last_x: Any = None):
        super().__init__(message)
        self.trace = trace or []
        self.last_x = last_x
