"""Exception hierarchy.

``InputError`` maps to CLI exit code 2, ``NumericalError`` to exit code 3.
"""


class SimcalError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SimcalError):
    """Invalid user input (bad CSV, inconsistent flags, schema violations)."""


class NumericalError(SimcalError):
    """Numerical failure inside an algorithm."""


class RankDeficientError(NumericalError):
    """Restricted design matrix is singular beyond tolerance."""


class SeparationError(NumericalError):
    """Logistic IRLS diverging: a coefficient exceeded the separation cap."""


class NonConvergenceError(NumericalError):
    """Iteration cap hit without meeting the convergence tolerance."""


class DegenerateSigmaError(NumericalError):
    """Residual standard deviation is zero where a positive one is required."""


class OverflowPredictionError(NumericalError):
    """Poisson linear predictor exceeds the representable range."""


class DomainViolationError(NumericalError):
    """One-step calibration produced a probability outside [0, 1]."""


class SimulationFailedError(NumericalError):
    """A Monte Carlo replicate failed; carries the failing replicate index."""

    def __init__(self, replicate: int, cause: Exception):
        super().__init__(f"replicate {replicate} failed: {cause}")
        self.replicate = replicate
        self.cause = cause


class BracketFailureError(NumericalError):
    """Root bracketing failed: the target value is unreachable."""


class TooFewSamplesError(InputError):
    """Not enough samples for the requested statistical test."""
