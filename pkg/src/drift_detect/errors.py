"""Exception types shared across the package."""

from __future__ import annotations


class DriftDetectError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DriftDetectError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DegeneratePrior(DriftDetectError, ValueError):
    """The prior puts no mass on hypothesis 0, so the ratio chart is undefined.

    Permute the hypotheses so that a positive-mass one sits in slot 0, solve
    there, and map the result back through the same permutation.
    """


class NonConvergence(DriftDetectError, RuntimeError):
    """The boundary iteration did not reach tolerance within the sweep budget.

    The last iterate is attached as ``partial`` so callers can inspect (or
    persist) the diagnostic state.
    """

    def __init__(self, message: str, partial=None, iteration_log=()):
        super().__init__(message)
        self.partial = partial
        self.iteration_log = tuple(iteration_log)


class NoBracket(DriftDetectError, RuntimeError):
    """No sign change could be established for a boundary-update root solve."""


class BoundaryMismatch(DriftDetectError, ValueError):
    """A boundaries artifact was produced for different model parameters."""
