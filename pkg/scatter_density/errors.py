"""Exception hierarchy for scatter-density.

Every error carries the process exit status the CLI reports for it and,
once it has passed through the approximation pipeline, the stage it came from.
"""


class ScatterError(Exception):
    """Base class for all scatter-density failures."""

    exit_code = 1

    def __init__(self, message: str, stage: str = None):
        super().__init__(message)
        self.stage = stage

    def to_dict(self) -> dict:
        """Machine-readable summary used by the CLI result payloads"""
        return {
            "error": str(self),
            "type": type(self).__name__,
            "exit_code": self.exit_code,
            "stage": self.stage,
        }


class ConfigError(ScatterError):
    """Configuration or usage problem detected before any computation."""

    exit_code = 2


class UnsupportedParameterError(ConfigError):
    """Kernel parameters outside every supported case table row."""


class SeparationError(ScatterError):
    """Two emitted nodes are closer than the provider's delta."""

    exit_code = 2

    def __init__(self, message: str, pair=None, stage: str = None):
        super().__init__(message, stage)
        self.pair = pair


class ExhaustionError(ScatterError):
    """A finite provider cannot emit a node of the requested magnitude."""

    exit_code = 3


class PrecisionError(ScatterError):
    """A high-precision solve left a residual above its threshold."""

    exit_code = 4

    def __init__(self, message: str, residual=None, precision_bits: int = None, stage: str = None):
        super().__init__(message, stage)
        self.residual = residual
        self.precision_bits = precision_bits


class BudgetError(ScatterError):
    """An iteration cap was reached before the error budget was met."""

    exit_code = 5

    def __init__(self, message: str, best_error: float = None, stage: str = None):
        super().__init__(message, stage)
        self.best_error = best_error

    def to_dict(self) -> dict:
        summary = super().to_dict()
        summary["best_error"] = self.best_error
        return summary


class DegreeCapError(BudgetError):
    """Chebyshev pre-approximation hit its degree cap."""

    def __init__(self, message: str, best_error: float = None, degree: int = None, stage: str = None):
        super().__init__(message, best_error, stage)
        self.degree = degree


class FloorTooSmallError(BudgetError):
    """Recovered basis polynomial misses the caller's budget at this y1."""

    def __init__(self, message: str, best_error: float = None, combination=None, stage: str = None):
        super().__init__(message, best_error, stage)
        self.combination = combination


class SingularityError(ScatterError):
    """Alternant system is exactly singular (repeated nodes)."""

    exit_code = 6

    def __init__(self, message: str, nodes=None, stage: str = None):
        super().__init__(message, stage)
        self.nodes = nodes


class DegeneracyError(ScatterError):
    """A basis polynomial lacks the degree the case table promised."""


class ZeroFError(ScatterError):
    """F(y) vanished at a node; the doubling sequence must start further out."""
