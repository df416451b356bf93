"""Capacity lower bounds via Gaussian pseudo-inputs.

A mechanistic channel is described by its conditional moment functions
m(x) = E[Z | X = x] and v(x) = V[Z | X = x]. Placing a Gaussian law on the
pseudo-input M = m(X) gives, by the total-variance decomposition,
V[Z] = V[M] + E{V[Z|X]}, and the resulting explained-variance bound
-1/2 log nu is maximized over the Gaussian family by a derivative-free
search with common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .bounds import (
    BoundEstimate,
    BoundKind,
    Direction,
    NuStatistic,
    bound_from_nu,
    cholesky_logdet,
)
from .errors import (
    DomainEscapeError,
    InfeasibleSearchBoxError,
    InversionFailureError,
)

# Two-sided standard-normal quantile for 99.9% central mass.
_Z999 = 3.2905267314919255

_BISECT_TOL = 1e-10
_MAX_ESCAPE_FRACTION = 1e-3


@dataclass(frozen=True)
class ChannelMoments:
    """Conditional moment functions of a channel Z | X.

    mean_fn must be one-to-one and continuously differentiable on the open
    box `domain`; cond_var_fn must return positive variances (d = 1) or SPD
    matrices. For d_x > 1 a user-supplied `inverse_fn` is required; for
    d_x = 1 the inverse is computed by bracketed bisection and monotonicity
    is spot-checked on a grid.
    """

    mean_fn: Callable[[np.ndarray], np.ndarray]
    cond_var_fn: Callable[[np.ndarray], np.ndarray]
    domain: Tuple[Tuple[float, float], ...]
    inverse_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        dom = tuple((float(a), float(b)) for a, b in self.domain)
        object.__setattr__(self, "domain", dom)
        for a, b in dom:
            if not (a < b):
                raise ValueError("domain must be an open box with lo < hi")
        if self.d_x > 1 and self.inverse_fn is None:
            raise ValueError("d_x > 1 requires a user-supplied inverse_fn")
        if self.d_x == 1:
            a, b = dom[0]
            grid = np.linspace(a, b, 64)
            vals = np.asarray(self.mean_fn(grid), dtype=float)
            diffs = np.diff(vals)
            if not (np.all(diffs > 0) or np.all(diffs < 0)):
                raise ValueError("mean_fn is not strictly monotone on the domain grid")

    @property
    def d_x(self) -> int:
        return len(self.domain)

    def mean_range(self) -> Tuple[float, float]:
        """Image interval of mean_fn for d_x = 1."""
        a, b = self.domain[0]
        va = float(np.asarray(self.mean_fn(np.array([a])))[0])
        vb = float(np.asarray(self.mean_fn(np.array([b])))[0])
        return (min(va, vb), max(va, vb))


@dataclass(frozen=True)
class GaussianPseudoInput:
    """Gaussian law for the pseudo-input M = m(X)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape must match the mean dimension")
        # SPD check (allow the tau^2 -> 0 limit only through a tiny floor).
        if mean.size == 1:
            if cov[0, 0] < 0:
                raise ValueError("variance must be nonnegative")
        else:
            cholesky_logdet(cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class CapacityBound:
    """A capacity lower-bound evaluation with its Monte Carlo uncertainty."""

    estimate: BoundEstimate
    mc_stderr: float
    mc_draws: int
    escaped_fraction: float = 0.0

    @property
    def nats(self) -> float:
        return self.estimate.nats

    @property
    def bits(self) -> float:
        return self.estimate.bits


def _invert_bisect(channel: ChannelMoments, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized bisection inverse of mean_fn on the 1-d domain.

    Returns (x, inside) where inside flags targets bracketed by the image
    interval; escaped targets get NaN.
    """
    a, b = channel.domain[0]
    va = float(np.asarray(channel.mean_fn(np.array([a])))[0])
    vb = float(np.asarray(channel.mean_fn(np.array([b])))[0])
    increasing = vb > va
    lo_val, hi_val = (va, vb) if increasing else (vb, va)
    inside = (targets > lo_val) & (targets < hi_val)

    lo = np.full(targets.shape, a)
    hi = np.full(targets.shape, b)
    n_iter = max(1, int(math.ceil(math.log2(max((b - a) / _BISECT_TOL, 2.0)))))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = np.asarray(channel.mean_fn(mid), dtype=float)
        go_right = (fm < targets) if increasing else (fm > targets)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    x = 0.5 * (lo + hi)

    check = np.asarray(channel.mean_fn(x[inside]), dtype=float)
    scale = max(abs(lo_val), abs(hi_val), 1.0)
    if check.size and np.max(np.abs(check - targets[inside])) > 1e-6 * scale:
        raise InversionFailureError("bisection failed to reproduce the target pseudo-inputs")
    return np.where(inside, x, np.nan), inside


def bound_at(channel: ChannelMoments, pseudo: GaussianPseudoInput,
             mc_draws: int = 10_000, seed: int = 0) -> CapacityBound:
    """Evaluate the capacity lower bound at a fixed Gaussian pseudo-input.

    E{V[Z|X]} is averaged over Monte Carlo draws M ~ pseudo, X = m^{-1}(M);
    V[M] enters exactly through the pseudo-input covariance. The standard
    error is a delta-method (influence-function) estimate.
    """
    if mc_draws < 1_000:
        raise ValueError("mc_draws must be >= 1e3")
    d = pseudo.dim
    rng = np.random.default_rng(seed)

    if d == 1:
        tau2 = float(pseudo.covariance[0, 0])
        m_draws = pseudo.mean[0] + math.sqrt(max(tau2, 0.0)) * rng.standard_normal(mc_draws)
        x, inside = _invert_bisect(channel, m_draws)
        escaped = 1.0 - float(np.mean(inside))
        if escaped > _MAX_ESCAPE_FRACTION:
            raise DomainEscapeError(
                f"{100 * escaped:.3f}% of pseudo-input draws fall outside m(domain)")
        v = np.asarray(channel.cond_var_fn(x[inside]), dtype=float).reshape(-1)
        if np.any(v <= 0):
            raise ValueError("cond_var_fn returned non-positive variances")
        cbar = float(np.mean(v))
        total = tau2 + cbar
        nu = NuStatistic(value=cbar / total,
                         numerator_logdet=math.log(cbar),
                         denominator_logdet=math.log(total))
        est = bound_from_nu(nu, direction=Direction.OUTPUT_GIVEN_INPUT)
        # d(bound)/d(cbar) = 1/2 (1/total - 1/cbar); stderr by the delta method.
        grad = 0.5 * (1.0 / total - 1.0 / cbar)
        stderr = abs(grad) * float(np.std(v, ddof=1)) / math.sqrt(v.size)
        return CapacityBound(estimate=est, mc_stderr=stderr,
                             mc_draws=mc_draws, escaped_fraction=escaped)

    # d > 1: user-supplied inverse; cond_var_fn evaluated per draw.
    chol = np.linalg.cholesky(pseudo.covariance)
    m_draws = pseudo.mean + rng.standard_normal((mc_draws, d)) @ chol.T
    x = np.asarray(channel.inverse_fn(m_draws), dtype=float)
    lo = np.array([ab[0] for ab in channel.domain])
    hi = np.array([ab[1] for ab in channel.domain])
    inside = np.all((x > lo) & (x < hi), axis=1)
    escaped = 1.0 - float(np.mean(inside))
    if escaped > _MAX_ESCAPE_FRACTION:
        raise DomainEscapeError(
            f"{100 * escaped:.3f}% of pseudo-input draws fall outside the domain")
    vs = np.stack([np.asarray(channel.cond_var_fn(xi), dtype=float)
                   for xi in x[inside]])
    cbar = vs.mean(axis=0)
    total = pseudo.covariance + cbar
    nu = NuStatistic(value=math.exp(cholesky_logdet(cbar) - cholesky_logdet(total)),
                     numerator_logdet=cholesky_logdet(cbar),
                     denominator_logdet=cholesky_logdet(total))
    est = bound_from_nu(nu, direction=Direction.OUTPUT_GIVEN_INPUT)
    grad = 0.5 * (np.linalg.inv(total) - np.linalg.inv(cbar))
    influence = np.einsum("ij,bji->b", grad, vs - cbar)
    stderr = float(np.std(influence, ddof=1)) / math.sqrt(vs.shape[0])
    return CapacityBound(estimate=est, mc_stderr=stderr,
                         mc_draws=mc_draws, escaped_fraction=escaped)


@dataclass(frozen=True)
class SearchBox:
    """Box constraints on the pseudo-input parameters (mean, log-sd)."""

    mean_lo: np.ndarray
    mean_hi: np.ndarray
    log_sd_lo: np.ndarray
    log_sd_hi: np.ndarray

    def __post_init__(self):
        for name in ("mean_lo", "mean_hi", "log_sd_lo", "log_sd_hi"):
            object.__setattr__(self, name,
                               np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not (np.all(self.mean_lo <= self.mean_hi)
                and np.all(self.log_sd_lo <= self.log_sd_hi)):
            raise ValueError("box must satisfy lo <= hi in every coordinate")

    @property
    def dim(self) -> int:
        return self.mean_lo.size

    def clip(self, theta: np.ndarray) -> np.ndarray:
        d = self.dim
        lo = np.concatenate([self.mean_lo, self.log_sd_lo])
        hi = np.concatenate([self.mean_hi, self.log_sd_hi])
        return np.clip(theta, lo, hi)

    def center(self) -> np.ndarray:
        return 0.5 * (np.concatenate([self.mean_lo, self.log_sd_lo])
                      + np.concatenate([self.mean_hi, self.log_sd_hi]))


@dataclass(frozen=True)
class OptimizationResult:
    pseudo: GaussianPseudoInput
    bound: CapacityBound
    evaluations: int
    budget_exhausted: bool


def _pseudo_from_theta(theta: np.ndarray, d: int) -> GaussianPseudoInput:
    mean = theta[:d]
    sd = np.exp(theta[d:])
    return GaussianPseudoInput(mean=mean, covariance=np.diag(sd ** 2))


def _check_feasible(channel: ChannelMoments, box: SearchBox) -> None:
    """Require 99.9% of the pseudo-input mass inside m(domain) at the worst
    corner of the box (d_x = 1 only; larger d relies on the user's inverse)."""
    if channel.d_x != 1:
        return
    lo_val, hi_val = channel.mean_range()
    sd_max = math.exp(float(box.log_sd_hi[0]))
    worst_hi = float(box.mean_hi[0]) + _Z999 * sd_max
    worst_lo = float(box.mean_lo[0]) - _Z999 * sd_max
    if worst_hi > hi_val or worst_lo < lo_val:
        raise InfeasibleSearchBoxError(
            "search box lets more than 0.1% of the pseudo-input mass escape m(domain)")


def maximize_capacity_bound(channel: ChannelMoments, search: SearchBox,
                            budget: int = 200, mc_draws: int = 10_000,
                            seed: int = 0) -> OptimizationResult:
    """Maximize the capacity lower bound over diagonal Gaussian pseudo-inputs.

    Nelder-Mead over (mean, log-sd) with common random numbers: every
    evaluation reuses the same MC seed, so the objective surface is
    deterministic given `seed`.
    """
    if budget < 10:
        raise ValueError("budget must allow at least 10 evaluations")
    _check_feasible(channel, search)
    d = search.dim

    best = {"nats": -np.inf, "theta": None, "bound": None}
    count = {"n": 0}

    def objective(theta: np.ndarray) -> float:
        count["n"] += 1
        clipped = search.clip(theta)
        penalty = 1e3 * float(np.sum(np.abs(theta - clipped)))
        try:
            cb = bound_at(channel, _pseudo_from_theta(clipped, d),
                          mc_draws=mc_draws, seed=seed)
        except DomainEscapeError:
            return 1e6
        if cb.nats > best["nats"]:
            best.update(nats=cb.nats, theta=clipped.copy(), bound=cb)
        return -cb.nats + penalty

    x0 = search.center()
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": 1e-6, "fatol": 1e-9,
                            "adaptive": d > 1})
    budget_exhausted = count["n"] >= budget and not res.success
    if best["theta"] is None:
        raise InfeasibleSearchBoxError("no feasible evaluation inside the search box")
    return OptimizationResult(pseudo=_pseudo_from_theta(best["theta"], d),
                              bound=best["bound"],
                              evaluations=count["n"],
                              budget_exhausted=budget_exhausted)
