"""Exception types raised by the toolkit."""


class DeltaDesignError(Exception):
    """Base class for all errors raised by deltadesign."""


class InvalidArgument(DeltaDesignError, ValueError):
    pass


class NotFound(DeltaDesignError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericDomainError(DeltaDesignError, ArithmeticError):
    pass


class SolverFailure(DeltaDesignError, RuntimeError):
    """A numerical solver did not converge.

    ``diagnostics`` carries whatever the solver knew when it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitFailure(SolverFailure):
    pass


class GuardExceeded(DeltaDesignError):
    """A combinatorial or iteration guard refused the request."""

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count
