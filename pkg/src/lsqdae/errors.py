"""Exception types shared across the package."""


class LsqDaeError(Exception):
    pass


class ArgumentError(LsqDaeError, ValueError):
    """Invalid arguments (bad sizes, out-of-range parameters, non-nested meshes)."""


class DomainError(LsqDaeError, ArithmeticError):
    """A user function produced non-finite output.

    ``t`` and ``component`` locate the offending evaluation when known.
    """

    def __init__(self, message, t=None, component=None, interval=None):
        super().__init__(message)
        self.t = t
        self.component = component
        self.interval = interval


class NumericalError(LsqDaeError, ArithmeticError):
    """Linear algebra or norm computation met non-finite data."""
