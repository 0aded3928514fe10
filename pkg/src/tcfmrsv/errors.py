"""Exception hierarchy shared by every module of the package."""


class TCFMRError(Exception):
    """Base class for all package errors."""


class ConfigError(TCFMRError, ValueError):
    """Invalid user configuration (CLI maps this to exit code 1)."""


class NumericError(TCFMRError, ArithmeticError):
    """A numerical procedure failed (CLI maps this to exit code 2)."""


class ContourViolation(TCFMRError, ValueError):
    """Contour lies outside the strip where a coefficient integral converges."""


class PoleHit(NumericError):
    pass


class DomainViolation(TCFMRError, ValueError):
    """Laplace argument outside the clock's admissible half-plane."""


class NonConvergent(NumericError):
    pass


class OutOfBand(NumericError):
    """Option price violates the no-arbitrage band, so no implied vol exists."""


class QuadratureFailure(NumericError):
    pass


class StepTooCoarse(TCFMRError, ValueError):
    pass
