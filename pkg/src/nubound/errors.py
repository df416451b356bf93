"""Exception types shared across the package."""


class NuboundError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveDefiniteError(NuboundError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


class OrderViolationError(NuboundError):
    """The conditional-variance matrix exceeds the total variance beyond tolerance."""


class SingularMatrixError(NuboundError):
    """A matrix that must be invertible is singular."""


class BoundDomainError(NuboundError):
    """A bound input (e.g. a nu value) is outside its valid domain, or the
    computed bound came out negative, which signals invalid inputs."""


class InvalidNuError(NuboundError):
    """Sample nu-hat fell outside (0, 1]; no bound is defined for this fit."""


class SupportViolationError(NuboundError):
    """An observation maps to CDF value 0 or 1 (outside the open support)."""


class DuplicatePointsError(NuboundError):
    """Exact duplicate joint points with jitter disabled."""


class TooFewPointsError(NuboundError):
    """Sample too small for the requested estimator."""


class RankDeficientError(NuboundError):
    """Spline design matrix is rank deficient (too many ties in the predictor)."""


class EmptyGridError(NuboundError):
    """An empty smoothing-parameter grid was supplied."""


class DomainEscapeError(NuboundError):
    """Too many pseudo-input draws fall outside the channel domain."""


class InversionFailureError(NuboundError):
    """Numerical inversion of the conditional-mean map failed."""


class InfeasibleSearchBoxError(NuboundError):
    """No feasible pseudo-input found inside the capacity search box."""


class NonConvergenceError(NuboundError):
    """Monte Carlo average for the ground-truth entropy did not stabilize."""
