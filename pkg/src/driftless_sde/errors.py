"""Exception types shared across the package."""


class SDEError(Exception):
    """Base class for all package errors."""


class ParameterError(SDEError, ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(SDEError, ValueError):
    """A function was evaluated outside its domain of validity."""


class ConfigError(SDEError, ValueError):
    """An experiment or CLI configuration is malformed."""


class DataError(SDEError, ValueError):
    """Input data cannot be used (e.g. non-positive values in a log fit)."""


class SingularIntegrandError(SDEError, ArithmeticError):
    """The Feller integrand 1/sigma^2 blew up at a quadrature node."""

    def __init__(self, location: float):
        self.location = location
        super().__init__(f"sigma vanishes at quadrature node y={location!r}")


class SimulationError(SDEError, FloatingPointError):
    """The Euler-Maruyama recursion produced a non-finite state."""

    def __init__(self, step: int, path_index: int | None = None):
        self.step = step
        self.path_index = path_index
        where = f" on path {path_index}" if path_index is not None else ""
        super().__init__(f"non-finite state at step {step}{where}")
