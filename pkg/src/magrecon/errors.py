"""Exception hierarchy shared across the package."""


class MagreconError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(MagreconError, ValueError):
    """An operation received an argument violating its preconditions."""


class SolverFailureError(MagreconError, RuntimeError):
    """A linear solve did not meet its residual contract."""

    def __init__(self, message: str, achieved_residual: float | None = None):
        super().__init__(message)
        self.achieved_residual = achieved_residual


class NewtonFailureError(MagreconError, RuntimeError):
    """The nonlinear solve ran out of iterations; carries the residual trace."""

    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


class StallSignal(MagreconError):
    """Descent direction vanished everywhere; the caller decides what that means."""


class ParseError(MagreconError, ValueError):
    """A field or report file is malformed; carries the offending line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class ConfigError(MagreconError, ValueError):
    """A run configuration is invalid; message names the offending key."""


class ReconstructionAborted(MagreconError, RuntimeError):
    """A reconstruction hit a solver failure; carries the partial report."""

    def __init__(self, message: str, partial_report, cause: Exception):
        super().__init__(message)
        self.partial_report = partial_report
        self.cause = cause
