"""Exception types shared across the package."""


class CLMAError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CLMAError, ValueError):
    """Arguments violate a documented precondition."""


class SingularChannelError(CLMAError, ArithmeticError):
    """The K x K Gram matrix of a channel is singular or too ill-conditioned."""


class InfeasibleError(CLMAError):
    """No selection or construction satisfies the constraints."""


class DegenerateAnglesError(InfeasibleError):
    """Two users share a virtual AoA on the axis assigned to separate them."""


class ConfigError(CLMAError, ValueError):
    """A run configuration failed validation."""
