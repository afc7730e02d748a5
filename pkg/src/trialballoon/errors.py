"""Exception types raised by the solver."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedError(ValueError):
    """The parameters are valid but this code path does not handle them."""


class PremiseError(ValueError):
    """The parameters violate the premise under which a closed form holds."""


class AccuracyError(ArithmeticError):
    """A numerical procedure failed its own convergence check."""
