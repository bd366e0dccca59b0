"""Exception types shared across the package."""


class HetsleepError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(HetsleepError):
    """A size guard was exceeded (pattern enumeration cap, LP dimension cap)."""


class GenerationError(HetsleepError):
    """Random scenario generation could not satisfy placement constraints."""


class ConfigError(HetsleepError):
    """Inconsistent or unsupported configuration (topology shape, cluster map)."""


class ConvergenceError(HetsleepError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverError(HetsleepError):
    """An internal LP solve returned a non-optimal status where one was required."""


class ScenarioError(HetsleepError):
    """A scenario document failed schema validation or referenced missing data."""
