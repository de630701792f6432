"""Exception types raised across the package."""


class PolyfragError(Exception):
    """Base class for all package errors."""


class DomainError(PolyfragError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConvergenceError(PolyfragError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The last iterate and its residual are kept so callers can inspect them.
    """

    def __init__(self, message, eigenvalue=None, density=None, residual=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.density = density
        self.residual = residual


class CFLError(DomainError):
    """Time step too large for the explicit transport scheme."""


class NegativeDensityError(PolyfragError, RuntimeError):
    """The simulated density went negative beyond round-off."""


class ParseError(PolyfragError, ValueError):
    """Malformed strain data or configuration."""


class FitError(PolyfragError, RuntimeError):
    """Every start of the least-squares fit failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
