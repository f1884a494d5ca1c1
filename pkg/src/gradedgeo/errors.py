"""Exception types shared across the package."""


class GradedGeoError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(GradedGeoError, ValueError):
    """Operand shapes disagree with the declared space dimensions."""


class LevelRangeError(GradedGeoError, IndexError):
    """Seminorm level outside 1..N."""


class GradingError(GradedGeoError, ValueError):
    """A Gram family violates symmetry, positivity or the grading order.

    Carries the offending level pair (1-based) when one exists.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class DomainExitError(GradedGeoError, RuntimeError):
    """A trajectory left the chart domain where staying inside was required."""

    def __init__(self, message, t_reached=None, exit_reason=None):
        super().__init__(message)
        self.t_reached = t_reached
        self.exit_reason = exit_reason


class ConvergenceError(GradedGeoError, RuntimeError):
    """An iterative solve (shooting, bisection) failed to converge."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularMetricError(GradedGeoError, ValueError):
    """A Gram matrix required to be positive-definite is singular.

    Carries the point at which the inversion failed.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConfigError(GradedGeoError, ValueError):
    """Invalid run configuration (schema violation, unknown catalog id, ...)."""
