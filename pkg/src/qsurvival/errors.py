"""Exception types raised by the package."""


class ConfigurationError(ValueError):
    """A model, law or run configuration is invalid or mutually incompatible."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class MonotonicityError(ValueError):
    """A survival series increased by more than rounding noise."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is finite."""


class InconclusiveError(RuntimeError):
    """A scaling analysis could not separate the regimes it was asked to locate."""
