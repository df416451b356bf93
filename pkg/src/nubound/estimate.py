"""Sample-based inference for the explained-variance lower bound.

Pipeline: Gaussianize X, regress the Gaussianized values on Z with a cubic
smoothing spline, turn the fitted-value variance into nu-hat and the bound
-1/2 log(nu-hat), wrap the bound in a bias-corrected accelerated (BCa)
bootstrap confidence interval, and combine its lower limit with a k-NN
mutual-information estimate into a composite estimator.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from . import spline
from .errors import InvalidNuError, TooFewPointsError
from .knnmi import KnnConfig, estimate_mi
from .sample import JointSample
from .transforms import GaussianizingMap, gaussianize

LOG2 = math.log(2.0)
_MAX_REDRAWS = 10          # redraw attempts per bootstrap replicate
_DEGENERATE_FRACTION = 0.2


class StatKind(enum.Enum):
    # regress the Gaussianized input on Z; denominator = sample variance of
    # the Gaussianized input (self-normalized ratio of sample variances)
    SPLINE_NU = "spline_nu"
    # as SPLINE_NU but with the known variance 1 as the denominator
    SPLINE_NU_KNOWN = "spline_nu_known"
    # regress Z on the (Gaussianized) input; denominator = sample variance of Z
    SPLINE_NU_OUTPUT = "spline_nu_output"
    # -1/2 log(1 - Corr^2) of the Gaussianized pairs
    CORRELATION = "correlation"


class CompositeSource(enum.Enum):
    KNN = "knn"
    CI_LOWER = "ci_lower"


@dataclass(frozen=True)
class SplineConfig:
    knot_count: int = 10
    lambda_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.knot_count < 4:
            raise ValueError("knot_count must be >= 4")


@dataclass(frozen=True)
class NuHatResult:
    nu_hat: float
    fitted_variance: float
    known_variance: float
    bound_nats: Optional[float]     # None when nu_hat <= 0
    lam: float
    knot_count: int

    @property
    def valid(self) -> bool:
        return self.bound_nats is not None

    @property
    def bound_bits(self) -> Optional[float]:
        return None if self.bound_nats is None else self.bound_nats / LOG2


@dataclass(frozen=True)
class BcaInterval:
    lower: float                    # nats
    upper: float                    # nats
    level: float
    replicates: int
    z0: float
    a: float
    theta_hat: float
    invalid_fraction: float
    degenerate: bool

    @property
    def lower_bits(self) -> float:
        return self.lower / LOG2

    @property
    def upper_bits(self) -> float:
        return self.upper / LOG2


@dataclass(frozen=True)
class CompositeEstimate:
    value: float                    # nats
    knn_value: float
    ci_lower: float
    source: CompositeSource
    interval: Optional[BcaInterval] = None
    degenerate_fallback: bool = False

    @property
    def value_bits(self) -> float:
        return self.value / LOG2


def _bound_from_fitted_variance(fitted_variance: float,
                                known_variance: float = 1.0):
    nu = 1.0 - fitted_variance / known_variance
    if 0.0 < nu <= 1.0:
        return nu, -0.5 * math.log(nu)
    return nu, None


def nu_hat(sample: JointSample, gmap: GaussianizingMap,
           spline_cfg: Optional[SplineConfig] = None) -> NuHatResult:
    """nu-hat and the bound -1/2 log(nu-hat) from spline fitted values.

    The Gaussianized input has known variance 1 by construction, so
    nu_hat = 1 - sample variance of the fitted values. A fitted variance at
    or above 1 is recorded as an invalid nu (bound undefined), not clamped.
    """
    if sample.n < 15:
        raise TooFewPointsError("nu_hat requires at least 15 observations")
    cfg = spline_cfg or SplineConfig()
    xt = gaussianize(sample.x, gmap)
    fit_res = spline.fit(sample.z, xt, knot_count=cfg.knot_count,
                         lambda_grid=cfg.lambda_grid)
    fv = float(np.var(fit_res.fitted, ddof=1))
    nu, bound = _bound_from_fitted_variance(fv)
    return NuHatResult(nu_hat=nu, fitted_variance=fv, known_variance=1.0,
                       bound_nats=bound, lam=fit_res.lam,
                       knot_count=cfg.knot_count)


def _corr_bound_stat(xt: np.ndarray, z: np.ndarray):
    xc = xt - xt.mean()
    zc = z - z.mean()
    denom = math.sqrt(float(np.sum(xc ** 2) * np.sum(zc ** 2)))
    if denom == 0.0:
        return None
    r2 = (float(np.sum(xc * zc)) / denom) ** 2
    if r2 >= 1.0:
        return None
    return -0.5 * math.log(1.0 - r2)


def _batched_corr_stats(xt2: np.ndarray, z2: np.ndarray) -> np.ndarray:
    xc = xt2 - xt2.mean(axis=1, keepdims=True)
    zc = z2 - z2.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.sum(xc ** 2, axis=1) * np.sum(zc ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = (np.sum(xc * zc, axis=1) / denom) ** 2
        out = np.where((r2 < 1.0) & np.isfinite(r2), -0.5 * np.log1p(-r2), np.nan)
    return out


def _statistic_original(xt, z, cfg, stat: StatKind):
    """(theta_hat, lam) on the original data; theta_hat None if invalid."""
    if stat is StatKind.CORRELATION:
        return _corr_bound_stat(xt, z), 0.0
    if stat is StatKind.SPLINE_NU_OUTPUT:
        fit_res = spline.fit(xt, z, knot_count=cfg.knot_count,
                             lambda_grid=cfg.lambda_grid)
        fv = float(np.var(fit_res.fitted, ddof=1))
        known = float(np.var(z, ddof=1))
    else:
        fit_res = spline.fit(z, xt, knot_count=cfg.knot_count,
                             lambda_grid=cfg.lambda_grid)
        fv = float(np.var(fit_res.fitted, ddof=1))
        known = 1.0 if stat is StatKind.SPLINE_NU_KNOWN else float(np.var(xt, ddof=1))
    _, bound = _bound_from_fitted_variance(fv, known)
    return bound, fit_res.lam


def _batched_statistics(xt2, z2, lam, cfg, stat: StatKind) -> np.ndarray:
    """Bound statistic for many resampled datasets; NaN marks invalid rows."""
    if stat is StatKind.CORRELATION:
        return _batched_corr_stats(xt2, z2)
    if stat is StatKind.SPLINE_NU_OUTPUT:
        fitted = spline.batched_fitted_values(xt2, z2, lam, knot_count=cfg.knot_count)
        known = np.var(z2, axis=1, ddof=1)
    else:
        fitted = spline.batched_fitted_values(z2, xt2, lam, knot_count=cfg.knot_count)
        known = 1.0 if stat is StatKind.SPLINE_NU_KNOWN else np.var(xt2, axis=1, ddof=1)
    fv = np.var(fitted, axis=1, ddof=1)
    nu = 1.0 - fv / known
    with np.errstate(invalid="ignore"):
        return np.where((nu > 0.0) & (nu <= 1.0), -0.5 * np.log(np.clip(nu, 1e-300, None)),
                        np.nan)


def _resample_indices(n: int, B: int, seed: int, knot_count: int,
                      z: np.ndarray, need_distinct: bool) -> np.ndarray:
    """(B, n) bootstrap index matrix; each replicate uses its own RNG stream
    derived from (seed, replicate, attempt) and is redrawn while it has too
    few distinct z values (up to 10 attempts)."""
    idx = np.empty((B, n), dtype=np.intp)
    for b in range(B):
        for attempt in range(_MAX_REDRAWS):
            rows = np.random.default_rng([seed, b, attempt]).integers(0, n, n)
            if not need_distinct:
                break
            if np.unique(z[rows]).size >= knot_count + 2:
                break
        idx[b] = rows
    return idx


def bca_interval(sample: JointSample, gmap: GaussianizingMap,
                 spline_cfg: Optional[SplineConfig] = None,
                 level: float = 0.90, B: int = 2000, seed: int = 0,
                 statistic: StatKind = StatKind.SPLINE_NU) -> BcaInterval:
    """BCa bootstrap confidence interval for the bound -1/2 log(nu).

    Nonparametric paired resampling of (x, z); the smoothing parameter is
    selected once on the original data and held fixed across resamples, while
    knot positions are recomputed from each resample. Deterministic given
    `seed`.
    """
    if B < 200:
        raise ValueError("B must be >= 200")
    if not 0.5 < level < 1.0:
        raise ValueError("level must be in (0.5, 1)")
    cfg = spline_cfg or SplineConfig()
    n = sample.n
    xt = gaussianize(sample.x, gmap)
    z = np.asarray(sample.z, dtype=float)

    theta_hat, lam = _statistic_original(xt, z, cfg, statistic)
    if theta_hat is None:
        raise InvalidNuError("the bound statistic is undefined on the original sample")

    need_distinct = statistic is not StatKind.CORRELATION
    regressor = xt if statistic is StatKind.SPLINE_NU_OUTPUT else z
    idx = _resample_indices(n, B, seed, cfg.knot_count, regressor, need_distinct)
    if need_distinct:
        ok = spline.valid_knot_rows(regressor[idx], cfg.knot_count)
    else:
        ok = np.ones(B, dtype=bool)
    stats = np.full(B, np.nan)
    if np.any(ok):
        stats[ok] = _batched_statistics(xt[idx[ok]], z[idx[ok]], lam, cfg, statistic)

    valid = np.isfinite(stats)
    invalid_fraction = 1.0 - float(np.mean(valid))
    degenerate = invalid_fraction > _DEGENERATE_FRACTION
    if degenerate:
        warnings.warn(f"{100 * invalid_fraction:.1f}% of bootstrap replicates "
                      "yielded an invalid nu; interval computed on valid replicates",
                      RuntimeWarning)
    vstats = np.sort(stats[valid])
    nb = vstats.size
    if nb < 20:
        raise InvalidNuError("too few valid bootstrap replicates for an interval")

    # Bias correction from the fraction of replicates below the original value.
    frac_below = np.clip(np.mean(vstats < theta_hat), 1.0 / (nb + 1), nb / (nb + 1.0))
    z0 = float(ndtri(frac_below))

    # Acceleration from jackknife skewness of leave-one-out statistics.
    keep = np.arange(n)[None, :].repeat(n, axis=0)
    loo = keep[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    if need_distinct:
        loo_ok = spline.valid_knot_rows(regressor[loo], cfg.knot_count)
    else:
        loo_ok = np.ones(n, dtype=bool)
    loo_stats = np.full(n, np.nan)
    if np.any(loo_ok):
        loo_stats[loo_ok] = _batched_statistics(xt[loo[loo_ok]], z[loo[loo_ok]],
                                                lam, cfg, statistic)
    jk = loo_stats[np.isfinite(loo_stats)]
    if jk.size >= 3:
        d = jk.mean() - jk
        denom = float(np.sum(d ** 2)) ** 1.5
        a = float(np.sum(d ** 3) / (6.0 * denom)) if denom > 0 else 0.0
    else:
        a = 0.0

    alpha = 1.0 - level
    lo_q, hi_q = [], []
    for zq in (ndtri(alpha / 2.0), ndtri(1.0 - alpha / 2.0)):
        adj = z0 + (z0 + zq) / (1.0 - a * (z0 + zq))
        q = float(ndtr(adj))
        lo_q.append(np.clip(q, 1.0 / (nb + 1), nb / (nb + 1.0)))
    q_lo, q_hi = lo_q
    lower = float(np.quantile(vstats, min(q_lo, q_hi)))
    upper = float(np.quantile(vstats, max(q_lo, q_hi)))
    return BcaInterval(lower=lower, upper=upper, level=level, replicates=B,
                       z0=z0, a=a, theta_hat=theta_hat,
                       invalid_fraction=invalid_fraction, degenerate=degenerate)


def composite(sample: JointSample, gmap: GaussianizingMap,
              knn_cfg: Optional[KnnConfig] = None,
              spline_cfg: Optional[SplineConfig] = None,
              level: float = 0.90, B: int = 2000, seed: int = 0,
              statistic: StatKind = StatKind.SPLINE_NU) -> CompositeEstimate:
    """Composite MI estimate: max of the k-NN estimate and the BCa lower limit.

    Falls back to the k-NN estimate alone when the bootstrap is degenerate or
    the bound statistic is undefined on the original sample.
    """
    knn_value = estimate_mi(sample, knn_cfg or KnnConfig())
    try:
        interval = bca_interval(sample, gmap, spline_cfg=spline_cfg,
                                level=level, B=B, seed=seed, statistic=statistic)
    except InvalidNuError:
        return CompositeEstimate(value=knn_value, knn_value=knn_value,
                                 ci_lower=-math.inf, source=CompositeSource.KNN,
                                 interval=None, degenerate_fallback=True)
    if interval.degenerate:
        return CompositeEstimate(value=knn_value, knn_value=knn_value,
                                 ci_lower=interval.lower, source=CompositeSource.KNN,
                                 interval=interval, degenerate_fallback=True)
    if interval.lower > knn_value:
        return CompositeEstimate(value=interval.lower, knn_value=knn_value,
                                 ci_lower=interval.lower,
                                 source=CompositeSource.CI_LOWER, interval=interval)
    return CompositeEstimate(value=knn_value, knn_value=knn_value,
                             ci_lower=interval.lower, source=CompositeSource.KNN,
                             interval=interval)
