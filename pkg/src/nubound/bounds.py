"""Population-level nu statistics and closed-form lower bounds on mutual information.

All bound arithmetic is in nats. Determinants are computed through Cholesky
log-determinants, never through raw determinant products.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundDomainError,
    NonPositiveDefiniteError,
    OrderViolationError,
    SingularMatrixError,
)

# Absolute eigenvalue slack for Loewner-order checks. Violations beyond this
# are errors, never clamped: silent clamping hides upstream estimation bugs.
PSD_SLACK = 1e-10

LOG2 = math.log(2.0)


class BoundKind(enum.Enum):
    NU_DETERMINANT = "nu_determinant"
    PEARSON_CORRELATION = "pearson_correlation"
    AVG_MMSE_TRACE = "avg_mmse_trace"


class Direction(enum.Enum):
    OUTPUT_GIVEN_INPUT = "output_given_input"
    INPUT_GIVEN_OUTPUT = "input_given_output"


def _as_matrix(m) -> np.ndarray:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_symmetric(a: np.ndarray, name: str, rtol: float = 1e-10) -> None:
    scale = max(float(np.max(np.abs(a))), 1.0)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise ValueError(f"{name} is not symmetric within tolerance")


def cholesky_logdet(m) -> float:
    """Log-determinant of a symmetric positive-definite matrix.

    Raises NonPositiveDefiniteError if the Cholesky factorization fails.
    """
    a = _as_matrix(m)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _check_loewner_order(total: np.ndarray, cond: np.ndarray) -> None:
    gap = total - cond
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (gap + gap.T))))
    if min_eig < -PSD_SLACK:
        raise OrderViolationError(
            f"conditional variance exceeds total variance (min eigenvalue of gap {min_eig:.3e})"
        )


@dataclass(frozen=True)
class CovariancePartition:
    """Covariance of a stacked (X, Z) vector, partitioned into blocks."""

    sigma_xx: np.ndarray
    sigma_xz: np.ndarray
    sigma_zz: np.ndarray

    def __post_init__(self):
        sxx = _as_matrix(self.sigma_xx)
        szz = _as_matrix(self.sigma_zz)
        sxz = np.atleast_2d(np.asarray(self.sigma_xz, dtype=float))
        if sxz.shape != (sxx.shape[0], szz.shape[0]):
            raise ValueError(
                f"sigma_xz shape {sxz.shape} does not match blocks {sxx.shape[0]}x{szz.shape[0]}"
            )
        _check_symmetric(sxx, "sigma_xx")
        _check_symmetric(szz, "sigma_zz")
        joint = self.assemble(sxx, sxz, szz)
        scale = max(float(np.max(np.abs(joint))), 1.0)
        if float(np.min(np.linalg.eigvalsh(joint))) < -PSD_SLACK * scale:
            raise ValueError("assembled joint covariance is not positive semi-definite")
        object.__setattr__(self, "sigma_xx", sxx)
        object.__setattr__(self, "sigma_xz", sxz)
        object.__setattr__(self, "sigma_zz", szz)

    @staticmethod
    def assemble(sxx, sxz, szz) -> np.ndarray:
        return np.block([[sxx, sxz], [sxz.T, szz]])

    @property
    def d_x(self) -> int:
        return self.sigma_xx.shape[0]

    @property
    def d_z(self) -> int:
        return self.sigma_zz.shape[0]


@dataclass(frozen=True)
class NuStatistic:
    """Determinant ratio det(E[e e^T]) / det(V[Z]), stored through log-determinants."""

    value: float
    numerator_logdet: float
    denominator_logdet: float


@dataclass(frozen=True)
class BoundEstimate:
    """A lower bound on mutual information, in nats.

    A negative value is rejected at construction: it signals invalid inputs
    upstream and must surface as an error rather than be clamped.
    """

    nats: float
    kind: BoundKind
    direction: Direction = Direction.OUTPUT_GIVEN_INPUT
    per_dimension: bool = False

    def __post_init__(self):
        if not math.isfinite(self.nats) or self.nats < 0.0:
            raise BoundDomainError(f"computed bound is not a nonnegative real: {self.nats}")

    @property
    def bits(self) -> float:
        return self.nats / LOG2


def nu_from_moments(total_var, expected_cond_var) -> NuStatistic:
    """Nu statistic from a total-variance matrix and the expected conditional variance."""
    total = _as_matrix(total_var)
    cond = _as_matrix(expected_cond_var)
    if total.shape != cond.shape:
        raise ValueError("total_var and expected_cond_var must have the same dimension")
    _check_loewner_order(total, cond)
    num = cholesky_logdet(cond)
    den = cholesky_logdet(total)
    log_ratio = num - den
    # Round-off can push an exactly-equal pair infinitesimally above 1.
    if 0.0 < log_ratio <= 1e-12:
        log_ratio = 0.0
    return NuStatistic(value=float(np.exp(log_ratio)), numerator_logdet=num, denominator_logdet=den)


def nu_bound_nats(nu_value: float) -> float:
    """Raw bound value -log(nu)/2; may be used before BoundEstimate validation."""
    if not (0.0 < nu_value <= 1.0):
        raise BoundDomainError(f"nu value {nu_value} outside (0, 1]")
    return -0.5 * math.log(nu_value)


def bound_from_nu(nu: NuStatistic, direction: Direction = Direction.OUTPUT_GIVEN_INPUT) -> BoundEstimate:
    """Lower bound -log(nu)/2 in nats."""
    value = nu.value if isinstance(nu, NuStatistic) else float(nu)
    return BoundEstimate(nats=nu_bound_nats(value), kind=BoundKind.NU_DETERMINANT, direction=direction)


def gaussian_corr_bound(cov: CovariancePartition) -> BoundEstimate:
    """Correlation-type bound for a Gaussian input: half the log-determinant ratio
    of V[Z] to its Schur complement. For scalars this is -log(1 - Corr^2)/2."""
    try:
        chol_xx = np.linalg.cholesky(cov.sigma_xx)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"sigma_xx is singular: {exc}") from exc
    # Schur complement sigma_zz - sigma_zx sigma_xx^{-1} sigma_xz via triangular solves.
    half = np.linalg.solve(chol_xx, cov.sigma_xz)
    schur = cov.sigma_zz - half.T @ half
    num = cholesky_logdet(cov.sigma_zz)
    try:
        den = cholesky_logdet(schur)
    except NonPositiveDefiniteError as exc:
        raise OrderViolationError(f"Schur complement is not positive definite: {exc}") from exc
    nats = 0.5 * (num - den)
    if -1e-12 < nats < 0.0:
        nats = 0.0
    return BoundEstimate(nats=nats, kind=BoundKind.PEARSON_CORRELATION)


def avg_mmse_nats(total_var, expected_cond_var) -> float:
    """Raw per-dimension average-MMSE bound; can legitimately be negative
    (the trace bound is weak), in which case the public wrapper errors."""
    total = _as_matrix(total_var)
    cond = _as_matrix(expected_cond_var)
    if total.shape != cond.shape:
        raise ValueError("total_var and expected_cond_var must have the same dimension")
    _check_loewner_order(total, cond)
    d = total.shape[0]
    avg_mmse = float(np.trace(cond)) / d
    if avg_mmse <= 0.0:
        raise NonPositiveDefiniteError("expected conditional variance has nonpositive trace")
    return 0.5 * (cholesky_logdet(total) / d - math.log(avg_mmse))


def avg_mmse_bound(total_var, expected_cond_var) -> BoundEstimate:
    """Per-dimension bound using the average minimum MSE across output coordinates."""
    return BoundEstimate(
        nats=avg_mmse_nats(total_var, expected_cond_var),
        kind=BoundKind.AVG_MMSE_TRACE,
        per_dimension=True,
    )


def input_side_bound(total_var_xtilde, expected_cond_var_xtilde) -> tuple[BoundEstimate, BoundEstimate]:
    """Per-dimension bounds conditioning on the response: the nu-determinant form
    and the weaker trace form, both for the Gaussianized input."""
    total = _as_matrix(total_var_xtilde)
    cond = _as_matrix(expected_cond_var_xtilde)
    d = total.shape[0]
    nu = nu_from_moments(total, cond)
    nu_form = BoundEstimate(
        nats=nu_bound_nats(nu.value) / d,
        kind=BoundKind.NU_DETERMINANT,
        direction=Direction.INPUT_GIVEN_OUTPUT,
        per_dimension=True,
    )
    trace_form = BoundEstimate(
        nats=avg_mmse_nats(total, cond),
        kind=BoundKind.AVG_MMSE_TRACE,
        direction=Direction.INPUT_GIVEN_OUTPUT,
        per_dimension=True,
    )
    return nu_form, trace_form
