"""Exception hierarchy used across the package."""

from __future__ import annotations


class LassoRiskError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(LassoRiskError, ValueError):
    """Array dimensions are inconsistent with each other."""


class DegenerateDesignError(LassoRiskError, ValueError):
    """Design contains a zero or non-finite column, or is otherwise unusable."""


class InvalidSupportError(LassoRiskError, ValueError):
    """Support indices are out of range, duplicated or unsorted."""


class InvalidPenaltyError(LassoRiskError, ValueError):
    """Tuning parameter is negative or not finite."""


class InvalidConeError(LassoRiskError, ValueError):
    """Cone parameters are out of their admissible range."""


class CapExceededError(LassoRiskError, ValueError):
    """A combinatorial computation would exceed its configured size cap."""


class ConvergenceError(LassoRiskError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    Attributes
    ----------
    best : object
        Best iterate (or partial result) available when the solver stopped.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class IterationLimitError(ConvergenceError):
    """Bisection ran out of iterations before the interval closed."""


class BoundDomainError(LassoRiskError, ValueError):
    """Inputs to a bound formula fall outside its domain."""


class MissingInputError(LassoRiskError, KeyError):
    """A required input for a bound formula was not supplied."""


class UnknownBoundError(LassoRiskError, KeyError):
    """No bound is registered under the requested identifier."""


class InvalidDesignError(LassoRiskError, ValueError):
    """Design-specific helper called with a design of the wrong kind."""


class InvalidConfigError(LassoRiskError, ValueError):
    """Scenario configuration is malformed or inconsistent."""


class ScenarioAbortedError(LassoRiskError, RuntimeError):
    """Too many trials failed for the Monte Carlo summary to be meaningful."""


class SchemaVersionError(LassoRiskError, ValueError):
    """Serialized report carries an unknown schema tag."""


class ReportFormatError(LassoRiskError, ValueError):
    """Serialized report is malformed."""
