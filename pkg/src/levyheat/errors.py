"""Exception hierarchy."""


class LevyHeatError(Exception):
    """Base class for all package errors."""


class DomainError(LevyHeatError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(LevyHeatError, ValueError):
    """Invalid parameters, grids or scenario settings."""


class RangeError(LevyHeatError, ValueError):
    """A lookup falls outside a tabulated range; widen the table."""


class NumericalError(LevyHeatError, RuntimeError):
    """A quadrature or solver failed to reach its tolerance."""


class HorizonError(NumericalError):
    """The relative-Kato parameter is not below one at the requested horizon."""


class InconsistencyError(LevyHeatError, RuntimeError):
    """Two characterizations that must agree produced different verdicts."""


class ScopeWarning(UserWarning):
    """Parameters lie outside the range in which an estimate is established."""
