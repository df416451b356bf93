"""Cubic smoothing-spline regression with leave-one-out cross-validation.

The basis is cubic B-splines on interior quantile knots with a second-derivative
penalty; linear functions span the penalty null space. A batched path fits many
resampled datasets at a fixed smoothing parameter in one set of array ops,
which is what makes bootstrap pipelines tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EmptyGridError, RankDeficientError

DEGREE = 3  # cubic


def _safe_div(num, den):
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    good = den > 0
    return np.divide(num, den, out=out, where=good)


def bspline_design(x, t, deriv: int = 0) -> np.ndarray:
    """Dense cubic B-spline design matrix, vectorized over leading batch axes.

    x: (..., P) evaluation points; t: (..., n_t) knot vector with 4-fold
    boundary knots. Returns (..., P, n_t - 4). deriv in {0, 1, 2}.
    Points must lie in [t[3], t[-4]]; the last interval is right-closed.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    xp = x[..., :, None]
    tlo = t[..., None, :-1]
    thi = t[..., None, 1:]
    tmax = t[..., None, -1:]
    # Degree-0 indicators; the last nonempty interval is closed on the right.
    basis = ((tlo <= xp) & (xp < thi)).astype(float)
    at_end = (xp == tmax) & (thi == tmax) & (tlo < thi)
    basis = np.where(at_end, 1.0, basis)

    levels = [basis]
    for d in range(1, DEGREE + 1):
        den1 = t[..., None, d:-1] - t[..., None, : -(d + 1)]
        den2 = t[..., None, d + 1:] - t[..., None, 1:-d]
        w1 = _safe_div(xp - t[..., None, : -(d + 1)], den1)
        w2 = _safe_div(t[..., None, d + 1:] - xp, den2)
        basis = w1 * levels[-1][..., :-1] + w2 * levels[-1][..., 1:]
        levels.append(basis)

    if deriv == 0:
        return levels[3]

    def diff_step(lower, d):
        den1 = t[..., None, d:-1] - t[..., None, : -(d + 1)]
        den2 = t[..., None, d + 1:] - t[..., None, 1:-d]
        return d * (_safe_div(lower[..., :-1], den1) - _safe_div(lower[..., 1:], den2))

    if deriv == 1:
        return diff_step(levels[2], 3)
    if deriv == 2:
        return diff_step(diff_step(levels[1], 2), 3)
    raise ValueError("deriv must be 0, 1 or 2")


def _knot_vector(interior, lo, hi) -> np.ndarray:
    interior = np.asarray(interior, dtype=float)
    if interior.ndim == 1:
        return np.concatenate([np.full(4, lo), interior, np.full(4, hi)])
    b = interior.shape[0]
    lo = np.broadcast_to(np.asarray(lo, dtype=float)[:, None], (b, 4))
    hi = np.broadcast_to(np.asarray(hi, dtype=float)[:, None], (b, 4))
    return np.concatenate([lo, interior, hi], axis=1)


def penalty_matrix(t) -> np.ndarray:
    """Exact integral of products of basis second derivatives over the knot span.

    Second derivatives of cubics are piecewise linear and (for simple interior
    knots) continuous, so the integral per interval [a, b] of f''g'' is
    h/6 * (2 f''(a)g''(a) + f''(a)g''(b) + f''(b)g''(a) + 2 f''(b)g''(b)).
    Batched over leading axes of t.
    """
    t = np.asarray(t, dtype=float)
    bp = t[..., 3:-3]
    h = bp[..., 1:] - bp[..., :-1]
    d2 = bspline_design(bp, t, deriv=2)
    left = d2[..., :-1, :]
    right = d2[..., 1:, :]
    own = (
        np.einsum("...q,...qi,...qj->...ij", h / 3.0, left, left)
        + np.einsum("...q,...qi,...qj->...ij", h / 3.0, right, right)
    )
    cross = np.einsum("...q,...qi,...qj->...ij", h / 6.0, left, right)
    return own + cross + np.swapaxes(cross, -1, -2)


@dataclass(frozen=True)
class SplineFit:
    knots: np.ndarray               # interior knots
    knot_vector: np.ndarray
    coefficients: np.ndarray
    lam: float
    hat_trace: float
    training_range: tuple[float, float]
    fitted: np.ndarray              # at training points, original order
    lambda_grid: np.ndarray
    cv_scores: np.ndarray
    boundary: tuple[tuple[float, float], tuple[float, float]]  # ((f, f') at lo, at hi)


def interior_quantile_knots(z, knot_count: int) -> np.ndarray:
    """Interior knots at the i/(K+1) quantile positions of the distinct
    predictor values (the standard smoothing-spline default). Taking order
    statistics of the unique values guarantees strictly increasing knots."""
    zu = np.unique(z)
    nu = zu.size
    k = min(knot_count, nu - 2)
    pos = np.rint((nu - 1) * np.arange(1, k + 1) / (k + 1)).astype(int)
    return zu[pos]


def _edf_lambda_grid(gamma, n, m, grid_size=41):
    """Log-spaced lambda grid spanning effective degrees of freedom ~[2.5, n/2]."""

    def edf(log_lam):
        return float(np.sum(1.0 / (1.0 + 10.0 ** log_lam * gamma)))

    def solve(target):
        lo, hi = -18.0, 18.0
        if edf(lo) < target:
            return lo
        if edf(hi) > target:
            return hi
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if edf(mid) > target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    hi_edf = min(m - 1e-6, max(n / 2.0, 3.0))
    lo_edf = 2.5
    log_lo = solve(hi_edf)   # small lambda
    log_hi = solve(lo_edf)   # large lambda
    return 10.0 ** np.linspace(log_lo, log_hi, grid_size)


def fit(z, xtilde, knot_count: int = 10, lambda_grid=None) -> SplineFit:
    """Penalized least-squares spline with lambda chosen by leave-one-out CV
    via the hat-matrix shortcut. Ties in z are collapsed to weighted unique
    points. Deterministic."""
    z = np.asarray(z, dtype=float).ravel()
    y = np.asarray(xtilde, dtype=float).ravel()
    n = z.size
    if y.size != n:
        raise ValueError("z and xtilde must have the same length")
    if n < knot_count + 4:
        raise ValueError(f"need at least knot_count + 4 = {knot_count + 4} observations, got {n}")
    zu, inverse, counts = np.unique(z, return_inverse=True, return_counts=True)
    if zu.size < knot_count:
        raise RankDeficientError(
            f"only {zu.size} distinct predictor values for {knot_count} knots"
        )
    w = counts.astype(float)
    yu = np.bincount(inverse, weights=y) / counts

    knots = interior_quantile_knots(z, knot_count)
    lo, hi = float(zu[0]), float(zu[-1])
    t = _knot_vector(knots, lo, hi)
    m = t.size - 4

    basis = bspline_design(zu, t)
    btwb = (basis * w[:, None]).T @ basis
    omega = penalty_matrix(t)
    try:
        np.linalg.cholesky(btwb)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(f"design matrix rank deficient: {exc}") from exc

    # Generalized eigendecomposition diagonalizes the whole lambda path.
    gamma, v = scipy.linalg.eigh(omega, btwb)
    gamma = np.clip(gamma, 0.0, None)
    c = basis @ v                      # hat factor: H(lam) = C diag(1/(1+lam*g)) C^T W
    proj = v.T @ (basis.T @ (w * yu))

    if lambda_grid is None:
        grid = _edf_lambda_grid(gamma, n, m)
    else:
        grid = np.sort(np.asarray(lambda_grid, dtype=float))
        if grid.size == 0:
            raise EmptyGridError("lambda grid is empty")

    wsum = float(np.sum(w))
    scores = np.empty(grid.size)
    for i, lam in enumerate(grid):
        shrink = 1.0 / (1.0 + lam * gamma)
        fitted_u = c @ (shrink * proj)
        hat_diag = w * np.einsum("ij,j,ij->i", c, shrink, c)
        denom = np.clip(1.0 - hat_diag, 1e-8, None)
        scores[i] = float(np.sum(w * ((yu - fitted_u) / denom) ** 2) / wsum)

    best = int(np.argmin(scores))
    lam = float(grid[best])
    shrink = 1.0 / (1.0 + lam * gamma)
    theta = v @ (shrink * proj)
    fitted_u = basis @ theta
    edf = float(np.sum(shrink))

    ends = np.array([lo, hi])
    vals = bspline_design(ends, t) @ theta
    slopes = bspline_design(ends, t, deriv=1) @ theta
    return SplineFit(
        knots=knots,
        knot_vector=t,
        coefficients=theta,
        lam=lam,
        hat_trace=edf,
        training_range=(lo, hi),
        fitted=fitted_u[inverse],
        lambda_grid=grid,
        cv_scores=scores,
        boundary=((float(vals[0]), float(slopes[0])), (float(vals[1]), float(slopes[1]))),
    )


def predict(fit_result: SplineFit, z) -> np.ndarray:
    """Evaluate a fit; natural-spline linear extrapolation outside the range."""
    z = np.asarray(z, dtype=float).ravel()
    lo, hi = fit_result.training_range
    (f_lo, s_lo), (f_hi, s_hi) = fit_result.boundary
    out = np.empty_like(z)
    inside = (z >= lo) & (z <= hi)
    if np.any(inside):
        out[inside] = bspline_design(z[inside], fit_result.knot_vector) @ fit_result.coefficients
    out[z < lo] = f_lo + s_lo * (z[z < lo] - lo)
    out[z > hi] = f_hi + s_hi * (z[z > hi] - hi)
    return out


def dump_coefficients(fit_result: SplineFit, path) -> None:
    """Plain-text coefficient dump for debugging."""
    with open(path, "w") as fh:
        fh.write(f"# lambda {fit_result.lam!r} edf {fit_result.hat_trace!r}\n")
        fh.write("# knot_vector " + " ".join(repr(v) for v in fit_result.knot_vector) + "\n")
        for coef in fit_result.coefficients:
            fh.write(f"{coef!r}\n")


def _batch_knot_vectors(z2, knot_count):
    # Rows must satisfy valid_knot_rows; per-row unique() is cheap next to the
    # batched linear algebra.
    b, _ = z2.shape
    knots = np.empty((b, knot_count))
    for i in range(b):
        knots[i] = interior_quantile_knots(z2[i], knot_count)
    lo = np.min(z2, axis=1)
    hi = np.max(z2, axis=1)
    return _knot_vector(knots, lo, hi)


def valid_knot_rows(z2, knot_count: int) -> np.ndarray:
    """Rows of z2 with enough distinct values for a full-size interior knot
    set (knot_count + 2 distinct values). Duplicate-heavy bootstrap resamples
    fail this and must be redrawn."""
    z2 = np.asarray(z2, dtype=float)
    zs = np.sort(z2, axis=1)
    distinct = 1 + np.count_nonzero(np.diff(zs, axis=1) > 0, axis=1)
    return distinct >= knot_count + 2


def batched_fitted_values(z2, y2, lam: float, knot_count: int = 10) -> np.ndarray:
    """Fitted values for many datasets at a fixed lambda.

    z2, y2: (B, N) arrays, one dataset per row, knots recomputed per row from
    that row's quantiles. Rows whose normal equations are singular come back
    as NaN. Matches fit() with lambda_grid=[lam] on each row (up to the knot
    nudging applied to colliding quantiles).
    """
    z2 = np.asarray(z2, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    t = _batch_knot_vectors(z2, knot_count)
    basis = bspline_design(z2, t)                      # (B, N, m)
    omega = penalty_matrix(t)                          # (B, m, m)
    gram = np.einsum("bni,bnj->bij", basis, basis) + lam * omega
    rhs = np.einsum("bni,bn->bi", basis, y2)
    # Jacobi equilibration: colliding bootstrap quantiles produce near-zero-width
    # knot intervals whose penalty entries scale like 1/h^3 and would otherwise
    # destroy the conditioning of the normal equations.
    d = np.sqrt(np.clip(np.einsum("bii->bi", gram), 1e-300, None))
    gram_s = gram / (d[:, :, None] * d[:, None, :])
    rhs_s = rhs / d
    try:
        theta = np.linalg.solve(gram_s, rhs_s[..., None])[..., 0] / d
    except np.linalg.LinAlgError:
        theta = np.full(rhs.shape, np.nan)
        for b in range(gram.shape[0]):
            try:
                theta[b] = np.linalg.solve(gram_s[b], rhs_s[b]) / d[b]
            except np.linalg.LinAlgError:
                pass
    return np.einsum("bni,bi->bn", basis, theta)
