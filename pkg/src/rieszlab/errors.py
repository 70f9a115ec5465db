"""Exception hierarchy shared by every module of the package."""


class RieszLabError(Exception):
    """Base class for all package errors."""


class ConfigError(RieszLabError):
    """Raised for malformed or incomplete experiment configuration."""


class NumericalError(RieszLabError):
    """Base class for numerical failures (exit code 3 at the CLI)."""


class RangeError(ConfigError, ValueError):
    """A model parameter lies outside its basic range."""


class AdmissibilityError(ConfigError, ValueError):
    """The Riesz exponent violates 0 < sigma < min(p*beta, d)."""


class DomainError(ValueError, RieszLabError):
    """An argument lies outside the domain of a closed-form function."""


class BoxTooLarge(ValueError, RieszLabError):
    """A time box extends past the horizon of the sampled paths."""


class NonFinite(NumericalError):
    """A singular kernel evaluation produced a non-finite value."""


class OrderTooLarge(ValueError, RieszLabError):
    """The requested moment order exceeds the factorial cost guard."""


class NonIntegrable(NumericalError):
    """Importance weights collapsed (effective sample size too small)."""


class GridTooCoarse(NumericalError):
    """A radial transform failed its Parseval consistency check."""


class NonConvergence(NumericalError):
    """Every restart of an optimizer was still improving when it stopped."""


class InsufficientTail(NumericalError):
    """Too few tail exceedances to fit a decay slope."""
