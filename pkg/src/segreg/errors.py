"""Exception hierarchy shared by the fitting, search and harness layers."""

from __future__ import annotations


class SegRegError(Exception):
    """Base class for all package errors."""


class DomainError(SegRegError, ValueError):
    """A covariate lies outside the model domain."""


class ResponseSupportError(SegRegError, ValueError):
    """A response value is outside the support of the family."""


class InvalidModelError(SegRegError, ValueError):
    """A model violates a structural invariant (ordering, continuity, sizes)."""


class DegenerateSegmentError(SegRegError):
    """A segment has too few points or a rank-deficient design."""


class NonConvergenceError(SegRegError):
    """An iterative fit did not converge (including complete separation)."""


class InfeasibleError(SegRegError):
    """No admissible change-point configuration exists."""


class HorizonTooSmallError(SegRegError, ValueError):
    """Simulation horizon or step is invalid for the requested functional."""


class DataError(SegRegError, ValueError):
    """Input data file is malformed or inconsistent."""


class ExperimentAbortedError(SegRegError):
    """A Monte Carlo run exceeded its tolerated failure rate."""
