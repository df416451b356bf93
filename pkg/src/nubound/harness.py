"""Monte Carlo replication study and convergence demo.

Reproduces the simulation-study layout: per-scenario replication loops
comparing the k-NN estimator against the composite estimator built from BCa
lower limits, scatter-panel data for single datasets at sampled parameter
vectors, and a discrete-input convergence table.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .estimate import SplineConfig, StatKind, bca_interval, composite
from .knnmi import KnnConfig, estimate_mi
from .models import (
    GenModel,
    ModelVariant,
    discrete_nu_zx,
    gaussian_x_cdf,
    generate,
    input_entropy_bits,
    mixture_x_cdf,
    sample_params,
    true_mi,
    z_marginal_logpdf,
)
from .transforms import known_cdf_map

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Scenario:
    model: GenModel
    n: int = 25
    replications: int = 500
    level: float = 0.90
    B: int = 2000
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class ReplicationReport:
    true_mi_bits: float
    knn_bias: float
    knn_rmse: float
    composite_bias: float
    composite_rmse: float
    coverage: float
    exceedance: float
    invalid_nu_rate: float
    corr_composite_bias: Optional[float] = None
    corr_composite_rmse: Optional[float] = None


def _pipeline_for(model: GenModel):
    """(GaussianizingMap, StatKind) for a model: output-direction statistic
    for the Gaussian model (X already Gaussian), input-direction for the
    mixture."""
    if model.variant is ModelVariant.BIVARIATE_NORMAL:
        cdf, ppf = gaussian_x_cdf(model)
        return known_cdf_map(cdf, ppf), StatKind.SPLINE_NU_OUTPUT
    if model.variant is ModelVariant.MIXTURE:
        cdf, ppf = mixture_x_cdf(model)
        return known_cdf_map(cdf, ppf), StatKind.SPLINE_NU
    raise ValueError(f"no inference pipeline for {model.variant}")


def run_scenario(s: Scenario) -> ReplicationReport:
    """Replicate the scenario and aggregate bias/rmse/coverage metrics (bits).

    Replicates that fail (undefined statistic on the original draw) are
    excluded and counted in invalid_nu_rate; the scenario fails outright if
    more than 10% are excluded.
    """
    truth = true_mi(s.model, rng=np.random.default_rng([s.seed, 999_983]))
    gmap, stat = _pipeline_for(s.model)
    is_mixture = s.model.variant is ModelVariant.MIXTURE

    knn_err, comp_err, corr_err = [], [], []
    covered, exceeded, invalid = 0, 0, 0
    for rep in range(s.replications):
        data = generate(s.model, s.n, np.random.default_rng([s.seed, rep]))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                c = composite(data, gmap, knn_cfg=KnnConfig(k=s.k),
                              level=s.level, B=s.B, seed=s.seed * 1_000_003 + rep,
                              statistic=stat)
                if is_mixture:
                    cc = composite(data, gmap, knn_cfg=KnnConfig(k=s.k),
                                   level=s.level, B=s.B,
                                   seed=s.seed * 1_000_003 + rep,
                                   statistic=StatKind.CORRELATION)
        except Exception:
            invalid += 1
            continue
        if c.interval is None:
            invalid += 1
            continue
        knn_err.append(c.knn_value / LOG2 - truth.mi_bits)
        comp_err.append(c.value / LOG2 - truth.mi_bits)
        covered += c.interval.lower <= truth.mi_nats <= c.interval.upper
        exceeded += truth.mi_nats >= c.interval.lower
        if is_mixture:
            corr_err.append(cc.value / LOG2 - truth.mi_bits)

    valid = len(knn_err)
    if valid < 0.9 * s.replications:
        raise RuntimeError(
            f"{s.replications - valid} of {s.replications} replicates excluded")
    knn_err = np.array(knn_err)
    comp_err = np.array(comp_err)

    def _bias_rmse(e):
        return float(np.mean(e)), float(np.sqrt(np.mean(e ** 2)))

    kb, kr = _bias_rmse(knn_err)
    cb, cr = _bias_rmse(comp_err)
    if is_mixture:
        rb, rr = _bias_rmse(np.array(corr_err))
    else:
        rb = rr = None
    return ReplicationReport(
        true_mi_bits=truth.mi_bits,
        knn_bias=kb, knn_rmse=kr,
        composite_bias=cb, composite_rmse=cr,
        coverage=covered / valid, exceedance=exceeded / valid,
        invalid_nu_rate=invalid / s.replications,
        corr_composite_bias=rb, corr_composite_rmse=rr,
    )


def run_convergence_demo(support_size: int = 2, sd_sequence=(1.0, 0.3, 0.1, 0.03, 0.01),
                         n_truth_draws: int = 100_000) -> list:
    """Discrete-input demo: as the conditional noise shrinks, the population
    nu(Z|X) falls toward 0 and the information gap H(X) - I(X;Z) closes.

    Support points are spaced 2 apart. Truth is computed by deterministic
    quadrature of the finite-mixture entropy (n_truth_draws controls nothing
    here but is kept for interface symmetry with MC truth). Returns a list of
    dict rows: cond_sd, nu_zx, mi_bits, gap_bits.
    """
    support = tuple(2.0 * i for i in range(support_size))
    rows = []
    for sd in sd_sequence:
        model = GenModel(ModelVariant.DISCRETE_INPUT, support=support, cond_sd=sd)
        h_bits = input_entropy_bits(model)

        def neg_logf(zv):
            return -float(z_marginal_logpdf(model, np.array([zv]))[0])

        lo = min(support) - 12 * sd
        hi = max(support) + 12 * sd
        h_z, _ = quad(lambda zv: neg_logf(zv) * math.exp(-neg_logf(zv)), lo, hi, limit=400)
        mi_nats = h_z - (0.5 * math.log(2 * math.pi * math.e) + math.log(sd))
        rows.append({
            "cond_sd": sd,
            "nu_zx": discrete_nu_zx(model),
            "mi_bits": mi_nats / LOG2,
            "gap_bits": h_bits - mi_nats / LOG2,
        })
    return rows


_SCENARIO_FIELDS = ["variant", "beta", "sigma_eps2", "sigma_x2", "n",
                    "replications", "level", "B", "k", "seed",
                    "true_mi_bits", "knn_bias", "knn_rmse",
                    "composite_bias", "composite_rmse",
                    "coverage", "exceedance", "invalid_nu_rate",
                    "corr_composite_bias", "corr_composite_rmse"]

_PANEL_FIELDS = ["variant", "beta", "sigma_eps2", "sigma_x2", "n", "seed",
                 "true_mi_bits", "knn_bits", "ci_lower_bits", "ci_upper_bits",
                 "composite_bits"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(reports, path) -> None:
    """Write one CSV row per (Scenario, ReplicationReport) pair."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_SCENARIO_FIELDS)
        for scen, rep in reports:
            m = scen.model
            w.writerow([_fmt(v) for v in [
                m.variant.value, m.beta, m.sigma_eps2, m.sigma_x2,
                scen.n, scen.replications, scen.level, scen.B, scen.k, scen.seed,
                rep.true_mi_bits, rep.knn_bias, rep.knn_rmse,
                rep.composite_bias, rep.composite_rmse,
                rep.coverage, rep.exceedance, rep.invalid_nu_rate,
                rep.corr_composite_bias, rep.corr_composite_rmse]])


def read_results(path) -> list:
    """Parse a scenario CSV back into (Scenario, ReplicationReport) pairs."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            model = GenModel(ModelVariant(row["variant"]),
                             beta=float(row["beta"]),
                             sigma_eps2=float(row["sigma_eps2"]),
                             sigma_x2=float(row["sigma_x2"]) if row["sigma_x2"] else None)
            scen = Scenario(model=model, n=int(row["n"]),
                            replications=int(row["replications"]),
                            level=float(row["level"]), B=int(row["B"]),
                            k=int(row["k"]), seed=int(row["seed"]))
            rep = ReplicationReport(
                true_mi_bits=float(row["true_mi_bits"]),
                knn_bias=float(row["knn_bias"]), knn_rmse=float(row["knn_rmse"]),
                composite_bias=float(row["composite_bias"]),
                composite_rmse=float(row["composite_rmse"]),
                coverage=float(row["coverage"]), exceedance=float(row["exceedance"]),
                invalid_nu_rate=float(row["invalid_nu_rate"]),
                corr_composite_bias=(float(row["corr_composite_bias"])
                                     if row["corr_composite_bias"] else None),
                corr_composite_rmse=(float(row["corr_composite_rmse"])
                                     if row["corr_composite_rmse"] else None))
            out.append((scen, rep))
    return out


def run_panel(variant: ModelVariant, n: int = 25, n_vectors: int = 60,
              B: int = 2000, k: int = 3, level: float = 0.90,
              seed: int = 0) -> list:
    """Scatter-panel mode: one dataset per sampled parameter vector.

    Returns dict rows with the true MI, the k-NN estimate, the BCa interval
    and the composite estimate, all in bits.
    """
    rows = []
    for i in range(n_vectors):
        rng = np.random.default_rng([seed, i])
        model = sample_params(variant, rng)
        truth = true_mi(model, rng=np.random.default_rng([seed, i, 1]))
        data = generate(model, n, np.random.default_rng([seed, i, 2]))
        gmap, stat = _pipeline_for(model)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                c = composite(data, gmap, knn_cfg=KnnConfig(k=k), level=level,
                              B=B, seed=seed * 7_368_787 + i, statistic=stat)
            except Exception:
                continue
        rows.append({
            "variant": model.variant.value, "beta": model.beta,
            "sigma_eps2": model.sigma_eps2, "sigma_x2": model.sigma_x2,
            "n": n, "seed": seed,
            "true_mi_bits": truth.mi_bits,
            "knn_bits": c.knn_value / LOG2,
            "ci_lower_bits": (c.interval.lower / LOG2 if c.interval else float("nan")),
            "ci_upper_bits": (c.interval.upper / LOG2 if c.interval else float("nan")),
            "composite_bits": c.value / LOG2,
        })
    return rows


def emit_panels(rows, path) -> None:
    """Write scatter-panel rows (plot data for redrawing the study figures)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_PANEL_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in _PANEL_FIELDS])


def emit_convergence(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cond_sd", "nu_zx", "mi_bits", "gap_bits"])
        for r in rows:
            w.writerow([_fmt(r[k]) for k in ["cond_sd", "nu_zx", "mi_bits", "gap_bits"]])
