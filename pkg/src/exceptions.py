"""Custom exceptions for the GMF partitioning toolkit with enhanced error context"""

from typing import Any


class GMFError(Exception):
    """Base exception for toolkit errors with enhanced context

    Attributes:
        message: Error message
        context: Additional context dictionary (e.g., n, k, limit)
        original_error: Original exception if wrapped
    """

    def __init__(self, message: str, context: dict[str, Any] | None = None, original_error: Exception | None = None):
        self.message = message
        self.context = context or {}
        self.original_error = original_error
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        """Format error message with context"""
        msg = self.message
        if self.context:
            ctx_str = ", ".join(f"{k}={v}" for k, v in self.context.items())
            msg = f"{msg} [{ctx_str}]"
        if self.original_error:
            msg = f"{msg} (caused by: {type(self.original_error).__name__}: {self.original_error})"
        return msg


class ValidationError(GMFError):
    """Input validation failed

    Common causes:
    - Assignment of wrong length or with values outside {-1, +1}
    - Edge probability outside [0, 1], negative weight ranges
    - Cluster count that does not divide the node count
    """

    pass


class CapacityError(GMFError):
    """Requested computation exceeds a configured capacity

    Common causes:
    - Exact enumeration above the node limit
    - Cluster larger than the table size cap
    - Too many equipartitions for the brute-force oracle
    """

    pass


class NormalizationError(GMFError):
    """Probability table does not sum to one within tolerance"""

    pass


class RelaxationError(GMFError):
    """SDP relaxation failed or did not converge

    Attributes:
        report: SolverReport of the failed solve, when one was produced
    """

    def __init__(
        self,
        message: str,
        context: dict[str, Any] | None = None,
        original_error: Exception | None = None,
        report: Any = None,
    ):
        self.report = report
        super().__init__(message, context, original_error)


class ConfigError(GMFError):
    """Configuration validation failed

    Common causes:
    - Missing or unparsable config file
    - Values out of range (trials < 1, k not dividing n)
    """

    pass


class SerializationError(GMFError):
    """Reading or writing a model, partition or state file failed"""

    pass
