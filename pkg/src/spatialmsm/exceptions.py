"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError (and subclasses) -> 3.
"""


class SpatialMSMError(Exception):
    """Base class for all package errors."""


class ConfigError(SpatialMSMError):
    """Invalid configuration file or command usage."""


class DataError(SpatialMSMError):
    """Invalid input data (cohort rows, adjacency lines, covariate arity)."""


class NumericalError(SpatialMSMError):
    """Numerical failure on inputs that were structurally valid."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix that must be symmetric positive definite is not."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach tolerance at maximum depth."""
