"""Exception hierarchy shared by the solver, problem builders and the CLI."""


class HVIError(Exception):
    """Base class for all package errors."""


class ConfigError(HVIError, ValueError):
    """Invalid parameters, unsupported combinations or malformed config files."""


class DimensionError(HVIError, ValueError):
    """A vector or matrix does not have the expected shape."""


class DomainError(HVIError, ValueError):
    """A point lies outside the domain of an extended-real function."""


class NonFiniteError(HVIError, ArithmeticError):
    """An operator returned NaN or Inf."""


class DivergenceError(HVIError, ArithmeticError):
    """The iteration produced a non-finite or exploding iterate.

    The last finite solver state is available as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
