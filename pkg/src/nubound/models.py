"""Data-generating mechanisms, parameter samplers and ground-truth MI oracles.

Two linear-regression models (Gaussian input and two-component mixture input)
plus a discrete-input demo model used to exercise the convergence results
empirically. The discrete model is our construction, not part of the study.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.optimize import brentq

from .errors import NonConvergenceError
from .sample import JointSample

LOG2 = math.log(2.0)
_HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)


class ModelVariant(enum.Enum):
    BIVARIATE_NORMAL = "gaussian"
    MIXTURE = "mixture"
    DISCRETE_INPUT = "discrete"


class TruthMethod(enum.Enum):
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class GenModel:
    """Z = beta*X + eps with eps ~ N(0, sigma_eps2) independent of X, and the
    input law set by the variant. The intercept is fixed at zero; it does not
    affect mutual information."""

    variant: ModelVariant
    beta: float = 1.0
    sigma_eps2: float = 1.0
    # BivariateNormal
    sigma_x2: Optional[float] = None
    # Mixture (defaults from the simulation study)
    mu1: float = 5.0
    mu2: float = -5.0
    sigma1_2: float = 25.0 / 4.0
    sigma2_2: float = 25.0 / 4.0
    # DiscreteInput: X uniform on support, Z | X=x ~ N(x, cond_sd^2), beta = 1
    support: Optional[tuple] = None
    probs: Optional[tuple] = None
    cond_sd: Optional[float] = None

    def __post_init__(self):
        if self.sigma_eps2 <= 0 and self.variant is not ModelVariant.DISCRETE_INPUT:
            raise ValueError("sigma_eps2 must be positive")
        if self.variant is ModelVariant.BIVARIATE_NORMAL and (
            self.sigma_x2 is None or self.sigma_x2 <= 0
        ):
            raise ValueError("BivariateNormal requires sigma_x2 > 0")
        if self.variant is ModelVariant.DISCRETE_INPUT:
            if self.support is None or self.cond_sd is None or self.cond_sd <= 0:
                raise ValueError("DiscreteInput requires a support and cond_sd > 0")
            if self.probs is None:
                k = len(self.support)
                object.__setattr__(self, "probs", tuple(1.0 / k for _ in range(k)))


@dataclass(frozen=True)
class TruthResult:
    mi_nats: float
    method: TruthMethod
    mc_draws: int = 0
    mc_stderr: float = 0.0

    @property
    def mi_bits(self) -> float:
        return self.mi_nats / LOG2


def sample_params(variant: ModelVariant, rng: np.random.Generator) -> GenModel:
    """Draw a parameter vector from the simulation study's parameter space."""
    if variant is ModelVariant.BIVARIATE_NORMAL:
        beta = rng.uniform(1.0, 10.0)
        sigma_eps2 = 10.0 ** rng.uniform(-2.0, 2.0)
        sigma_x2 = 10.0 ** rng.uniform(-2.0, 2.0)
        return GenModel(ModelVariant.BIVARIATE_NORMAL, beta=beta,
                        sigma_eps2=sigma_eps2, sigma_x2=sigma_x2)
    if variant is ModelVariant.MIXTURE:
        beta = 10.0 ** rng.uniform(-1.0, 1.0)
        sigma_eps2 = 10.0 ** rng.uniform(-2.5, 2.5)
        return GenModel(ModelVariant.MIXTURE, beta=beta, sigma_eps2=sigma_eps2)
    raise ValueError(f"no parameter sampler for {variant}")


def generate(model: GenModel, n: int, rng: np.random.Generator) -> JointSample:
    """Draw n i.i.d. (x, z) pairs from the model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if model.variant is ModelVariant.BIVARIATE_NORMAL:
        x = rng.normal(0.0, math.sqrt(model.sigma_x2), n)
    elif model.variant is ModelVariant.MIXTURE:
        comp = rng.integers(0, 2, n)
        mus = np.where(comp == 0, model.mu1, model.mu2)
        sds = np.where(comp == 0, math.sqrt(model.sigma1_2), math.sqrt(model.sigma2_2))
        x = rng.normal(mus, sds)
    elif model.variant is ModelVariant.DISCRETE_INPUT:
        x = rng.choice(np.asarray(model.support, dtype=float), size=n,
                       p=np.asarray(model.probs, dtype=float))
        z = rng.normal(x, model.cond_sd)
        return JointSample(x, z)
    else:
        raise ValueError(f"unknown variant {model.variant}")
    z = model.beta * x + rng.normal(0.0, math.sqrt(model.sigma_eps2), n)
    return JointSample(x, z)


# --- marginal helpers -------------------------------------------------------

def _z_mixture_components(model: GenModel):
    """Mean/variance/weight triples of the closed-form Gaussian-mixture marginal of Z."""
    if model.variant is ModelVariant.MIXTURE:
        means = np.array([model.beta * model.mu1, model.beta * model.mu2])
        variances = np.array([
            model.beta ** 2 * model.sigma1_2 + model.sigma_eps2,
            model.beta ** 2 * model.sigma2_2 + model.sigma_eps2,
        ])
        weights = np.array([0.5, 0.5])
    elif model.variant is ModelVariant.DISCRETE_INPUT:
        means = np.asarray(model.support, dtype=float)
        variances = np.full(means.size, model.cond_sd ** 2)
        weights = np.asarray(model.probs, dtype=float)
    else:
        raise ValueError("closed-form Z mixture defined for Mixture/DiscreteInput only")
    return means, variances, weights


def z_marginal_logpdf(model: GenModel, z) -> np.ndarray:
    means, variances, weights = _z_mixture_components(model)
    z = np.asarray(z, dtype=float)[..., None]
    logs = (
        np.log(weights)
        - 0.5 * np.log(2.0 * math.pi * variances)
        - 0.5 * (z - means) ** 2 / variances
    )
    m = np.max(logs, axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(logs - m), axis=-1, keepdims=True)))[..., 0]


def _draw_z_marginal(model: GenModel, m: int, rng: np.random.Generator) -> np.ndarray:
    means, variances, weights = _z_mixture_components(model)
    comp = rng.choice(means.size, size=m, p=weights)
    return rng.normal(means[comp], np.sqrt(variances[comp]))


def mixture_x_cdf(model: GenModel):
    """(cdf, ppf) of the mixture input's marginal, for the Gaussianizing map."""
    mus = np.array([model.mu1, model.mu2])
    sds = np.array([math.sqrt(model.sigma1_2), math.sqrt(model.sigma2_2)])

    def cdf(x):
        x = np.asarray(x, dtype=float)[..., None]
        return 0.5 * np.sum(ndtr((x - mus) / sds), axis=-1)

    lo = float(np.min(mus - 40 * sds))
    hi = float(np.max(mus + 40 * sds))

    def ppf(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.array([brentq(lambda t, ui=ui: cdf(t) - ui, lo, hi, xtol=1e-13)
                         for ui in u])

    return cdf, ppf


def gaussian_x_cdf(model: GenModel):
    sd = math.sqrt(model.sigma_x2)
    return (lambda x: ndtr(np.asarray(x, dtype=float) / sd),
            lambda u: sd * ndtri(np.asarray(u, dtype=float)))


def true_mi(model: GenModel, mc_draws: int = 100_000,
            rng: Optional[np.random.Generator] = None) -> TruthResult:
    """Ground-truth mutual information.

    Closed form for the bivariate normal; otherwise a Monte Carlo average of
    -log f(Z) under the exact closed-form mixture marginal of Z, minus the
    Gaussian conditional entropy.
    """
    if model.variant is ModelVariant.BIVARIATE_NORMAL:
        snr = model.beta ** 2 * model.sigma_x2 / model.sigma_eps2
        return TruthResult(mi_nats=0.5 * math.log1p(snr), method=TruthMethod.CLOSED_FORM)

    if mc_draws < 10_000:
        raise ValueError("Monte Carlo truth requires mc_draws >= 1e4")
    if rng is None:
        rng = np.random.default_rng(0)
    z = _draw_z_marginal(model, mc_draws, rng)
    neg_logf = -z_marginal_logpdf(model, z)
    h_z = float(np.mean(neg_logf))
    stderr = float(np.std(neg_logf, ddof=1) / math.sqrt(mc_draws))

    # Convergence monitor: the running mean over the last 10% of draws must
    # stay within 3 standard errors of the final value.
    tail_start = int(0.9 * mc_draws)
    running = np.cumsum(neg_logf)[tail_start:] / np.arange(tail_start + 1, mc_draws + 1)
    drift = float(np.max(np.abs(running - h_z)))
    if drift > 3.0 * stderr:
        raise NonConvergenceError(f"running mean drift {drift:.3e} exceeds 3 x stderr {stderr:.3e}")

    if model.variant is ModelVariant.MIXTURE:
        h_cond = _HALF_LOG_2PIE + 0.5 * math.log(model.sigma_eps2)
    else:
        h_cond = _HALF_LOG_2PIE + math.log(model.cond_sd)
    return TruthResult(mi_nats=h_z - h_cond, method=TruthMethod.MONTE_CARLO,
                       mc_draws=mc_draws, mc_stderr=stderr)


def input_entropy_bits(model: GenModel) -> float:
    """Discrete entropy H(X) in bits for the discrete-input model."""
    p = np.asarray(model.probs, dtype=float)
    return float(-np.sum(p * np.log(p)) / LOG2)


def discrete_nu_zx(model: GenModel) -> float:
    """Population nu(Z|X) of the discrete-input model, in closed form."""
    support = np.asarray(model.support, dtype=float)
    p = np.asarray(model.probs, dtype=float)
    var_x = float(np.sum(p * support ** 2) - np.sum(p * support) ** 2)
    cond_var = model.cond_sd ** 2
    return cond_var / (var_x + cond_var)


# --- population moments of the Gaussianized input given Z -------------------

def mixture_population_moments(model: GenModel, mc_draws: int = 1_000_000,
                               rng: Optional[np.random.Generator] = None,
                               grid_size: int = 4001):
    """Monte Carlo population moments for the mixture model's input-given-output
    bounds: explained variance of the Gaussianized input and its squared
    correlation with Z, each with an MC standard error.

    The conditional mean E[Xtilde | Z = z] is evaluated by quadrature on a fixed
    x-grid and interpolated at the Monte Carlo draws of Z; the interpolation
    error is negligible next to the MC error.

    Returns a dict with keys explained_var, explained_var_se, corr2, corr2_se,
    nu_bound_nats, corr_bound_nats.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    mus = np.array([model.mu1, model.mu2])
    sds = np.array([math.sqrt(model.sigma1_2), math.sqrt(model.sigma2_2)])
    lo = float(np.min(mus - 10 * sds))
    hi = float(np.max(mus + 10 * sds))
    xg = np.linspace(lo, hi, grid_size)

    # log density of X on the grid (two-component mixture)
    logs = (
        math.log(0.5)
        - 0.5 * np.log(2.0 * math.pi * sds[None, :] ** 2)
        - 0.5 * (xg[:, None] - mus[None, :]) ** 2 / sds[None, :] ** 2
    )
    mshift = logs.max(axis=1, keepdims=True)
    log_fx = (mshift + np.log(np.exp(logs - mshift).sum(axis=1, keepdims=True)))[:, 0]

    cdf, _ = mixture_x_cdf(model)
    u = np.clip(cdf(xg), 1e-15, 1.0 - 1e-15)
    s_x = ndtri(u)

    z = _draw_z_marginal(model, mc_draws, rng)
    zg = np.linspace(float(z.min()), float(z.max()), grid_size)

    sig_e = math.sqrt(model.sigma_eps2)
    # E[Xtilde | Z = z] on the z-grid via quadrature over the x-grid.
    t_grid = np.empty(grid_size)
    chunk = 256
    for start in range(0, grid_size, chunk):
        zc = zg[start:start + chunk, None]
        logw = log_fx[None, :] - 0.5 * ((zc - model.beta * xg[None, :]) / sig_e) ** 2
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        t_grid[start:start + chunk] = (w @ s_x) / w.sum(axis=1)

    t_z = np.interp(z, zg, t_grid)

    # Explained variance V{E[Xtilde|Z]}; V[Xtilde] = 1 by construction.
    centered = t_z - np.mean(t_z)
    sq = centered ** 2
    explained = float(np.mean(sq))
    explained_se = float(np.std(sq, ddof=1) / math.sqrt(mc_draws))

    # Squared correlation of (Xtilde, Z) by MC over paired draws.
    x_pairs = generate(model, mc_draws, rng)
    xt_pairs = np.interp(x_pairs.x, xg, s_x)
    zc2 = x_pairs.z - x_pairs.z.mean()
    xtc = xt_pairs - xt_pairs.mean()
    corr = float(np.sum(xtc * zc2) / math.sqrt(np.sum(xtc ** 2) * np.sum(zc2 ** 2)))
    corr2 = corr ** 2
    # Delta-method standard error for the squared correlation.
    corr2_se = float(2.0 * abs(corr) * (1.0 - corr2) / math.sqrt(mc_draws))

    nu_val = max(1.0 - explained, 1e-300)
    corr_nu = max(1.0 - corr2, 1e-300)
    return {
        "explained_var": explained,
        "explained_var_se": explained_se,
        "corr2": corr2,
        "corr2_se": corr2_se,
        "nu_bound_nats": -0.5 * math.log(nu_val),
        "nu_bound_se": 0.5 * explained_se / nu_val,
        "corr_bound_nats": -0.5 * math.log(corr_nu),
        "corr_bound_se": 0.5 * corr2_se / corr_nu,
    }
