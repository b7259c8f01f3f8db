"""
Error hierarchy shared by the solver, the pipeline and the CLI.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Any, Dict, Optional


class SteeringError(Exception):
    """
    Base class for all solver errors.
    """

    exit_code = 4


class DomainError(SteeringError, ValueError):
    """
    An operation was called outside its domain (order mismatch, b = 0, ...).
    """


class PreconditionError(DomainError):
    """
    Input violates a documented precondition, e.g. a singular Hankel matrix.
    """


class ConfigurationError(SteeringError, ValueError):
    """
    Scenario or configuration file is unreadable or invalid.
    """

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class InfeasibleError(SteeringError):
    """
    The requested moment trajectory cannot be realized under the noise.
    """

    exit_code = 3


class InfeasibleStepError(InfeasibleError):
    """
    No gain c in [0, 1] makes a single step reachable.
    """

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class PlanningError(InfeasibleError):
    """
    Plan repair could not make a step feasible.
    """

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


class NumericalError(SteeringError, RuntimeError):
    """
    A numerical procedure failed to converge or became pathological.
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class StageError(SteeringError):
    """
    A pipeline stage aborted; wraps the underlying error.
    """

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", SteeringError.exit_code)
        super().__init__(f"stage '{stage}' failed: {cause}")
