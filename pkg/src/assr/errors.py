class ASSRError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ASSRError, ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class DimensionError(ConfigError):
    pass


class DomainError(ASSRError, ValueError):
    """An argument outside the domain of a function (e.g. negative code)."""


class MetricError(ASSRError, ValueError):
    """A score that is undefined for the given inputs (e.g. all-zero truth)."""


class NumericalError(ASSRError, ArithmeticError):
    """Root-solve failure or integrator instability (CLI exit code 3)."""
