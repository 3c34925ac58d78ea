"""Exception hierarchy shared by every backend."""


class DephasingError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DephasingError, ValueError):
    """A parameter lies outside its admissible range."""


class PoleEvaluationError(DephasingError, ZeroDivisionError):
    """A Laplace-domain function was evaluated at (or too close to) a pole."""


class NoPointwiseValueError(DephasingError, ValueError):
    """The memoryless kernel is a delta function and has no pointwise value."""


class BackendMismatchError(DephasingError, ValueError):
    """The requested backend cannot handle the configured memory kernel."""


class NumericalFailureError(DephasingError, ArithmeticError):
    """Root finding, contour quadrature or integration failed to converge."""


class DivergenceError(NumericalFailureError):
    """Non-finite values appeared while time stepping."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class SamplerValidityError(DephasingError, ValueError):
    """No trajectory representation exists for the requested kernel."""


class ConfigError(DephasingError, ValueError):
    """Invalid run configuration; carries the offending key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where += f"`{key}`"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}" if where else message)
        self.key = key
        self.line = line
