"""
Error hierarchy for the clfm-TMLE package.
"""

from typing import Any, Optional


class TmleError(Exception):
    """Base class for all package errors."""


class ConfigError(TmleError, ValueError):
    """Invalid configuration value or file."""


class SchemaError(TmleError, ValueError):
    """Required columns missing from an input table."""


class ValidationError(TmleError, ValueError):
    """Input values outside their domain."""


class DegeneracyError(TmleError, ValueError):
    """Input carries no information (e.g. every unit treated)."""


class NoInformationError(TmleError, ValueError):
    """Fluctuation covariate is identically zero."""


class TargetingError(TmleError, RuntimeError):
    """Targeting step cannot be built from the current fits."""


class NuisanceFitError(TmleError, RuntimeError):
    """Initial outcome or propensity regression failed."""


class NonConvergenceError(TmleError, RuntimeError):
    """
    An iterative solver stopped without meeting its criterion.

    Attributes:
        best: Best iterate reached before giving up (solver specific)
    """

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best
