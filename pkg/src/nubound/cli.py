"""Command-line interface: knnmi, estimate, truth, simulate, capacity."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import harness
from .capacity import ChannelMoments, SearchBox, maximize_capacity_bound
from .estimate import bca_interval, composite, nu_hat
from .knnmi import KnnConfig, estimate_mi
from .models import (
    GenModel,
    ModelVariant,
    gaussian_x_cdf,
    mixture_x_cdf,
    true_mi,
)
from .sample import read_csv
from .transforms import empirical_rank_map, known_cdf_map

LOG2 = math.log(2.0)

_MODEL_NAMES = {"gaussian": ModelVariant.BIVARIATE_NORMAL,
                "mixture": ModelVariant.MIXTURE,
                "discrete": ModelVariant.DISCRETE_INPUT}


def _build_model(name: str, args) -> GenModel:
    variant = _MODEL_NAMES[name]
    if variant is ModelVariant.BIVARIATE_NORMAL:
        return GenModel(variant, beta=args.beta, sigma_eps2=args.sigma_eps2,
                        sigma_x2=args.sigma_x2)
    if variant is ModelVariant.MIXTURE:
        return GenModel(variant, beta=args.beta, sigma_eps2=args.sigma_eps2)
    support = tuple(float(v) for v in args.support.split(","))
    return GenModel(variant, support=support, cond_sd=args.cond_sd)


def _gmap_from_name(name: str, args):
    if name == "empirical":
        return empirical_rank_map()
    if name == "gaussian":
        cdf, ppf = gaussian_x_cdf(GenModel(ModelVariant.BIVARIATE_NORMAL,
                                           sigma_x2=args.sigma_x2))
        return known_cdf_map(cdf, ppf)
    if name == "mixture":
        cdf, ppf = mixture_x_cdf(GenModel(ModelVariant.MIXTURE))
        return known_cdf_map(cdf, ppf)
    raise SystemExit(f"unknown x-cdf '{name}' (use gaussian, mixture or empirical)")


def _read_config(path: str) -> dict:
    """Flat key=value config; '#' starts a comment."""
    cfg = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            cfg[key.strip()] = value.strip()
    return cfg


def _cmd_knnmi(args) -> int:
    sample = read_csv(args.input)
    nats = estimate_mi(sample, KnnConfig(k=args.k))
    print(f"knn_mi_nats={nats:.6f}")
    print(f"knn_mi_bits={nats / LOG2:.6f}")
    return 0


def _cmd_estimate(args) -> int:
    sample = read_csv(args.input)
    gmap = _gmap_from_name(args.x_cdf, args)
    result = nu_hat(sample, gmap)
    interval = bca_interval(sample, gmap, level=args.level, B=args.B,
                            seed=args.seed)
    comp = composite(sample, gmap, knn_cfg=KnnConfig(k=args.k),
                     level=args.level, B=args.B, seed=args.seed)
    print(json.dumps({
        "nu_hat": result.nu_hat,
        "bound_nats": result.bound_nats,
        "bound_bits": result.bound_bits,
        "bca_lower_nats": interval.lower,
        "bca_upper_nats": interval.upper,
        "bca_lower_bits": interval.lower_bits,
        "bca_upper_bits": interval.upper_bits,
        "level": interval.level,
        "knn_nats": comp.knn_value,
        "composite_nats": comp.value,
        "composite_bits": comp.value_bits,
        "composite_source": comp.source.value,
    }))
    return 0


def _cmd_truth(args) -> int:
    model = _build_model(args.model, args)
    result = true_mi(model, mc_draws=args.M,
                     rng=np.random.default_rng(args.seed))
    print(f"mi_nats={result.mi_nats:.6f}")
    print(f"mi_bits={result.mi_bits:.6f}")
    print(f"method={result.method.value}")
    if result.mc_draws:
        print(f"mc_stderr_nats={result.mc_stderr:.6e}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    model_name = cfg.get("model", "gaussian")
    variant = _MODEL_NAMES[model_name]
    n = int(cfg.get("n", 25))
    B = int(cfg.get("B", 2000))
    k = int(cfg.get("k", 3))
    level = float(cfg.get("level", 0.90))
    sample_parameters = cfg.get("parameter_sampling", "off") == "on"

    if sample_parameters:
        rows = harness.run_panel(variant, n=n,
                                 n_vectors=int(cfg.get("n_vectors", 60)),
                                 B=B, k=k, level=level, seed=args.seed)
        harness.emit_panels(rows, os.path.join(args.out, "panels.csv"))
    else:
        if variant is ModelVariant.BIVARIATE_NORMAL:
            model = GenModel(variant, beta=float(cfg.get("beta", 1.0)),
                             sigma_eps2=float(cfg.get("sigma_eps2", 1.0)),
                             sigma_x2=float(cfg.get("sigma_x2", 1.0)))
        else:
            model = GenModel(ModelVariant.MIXTURE,
                             beta=float(cfg.get("beta", 1.0)),
                             sigma_eps2=float(cfg.get("sigma_eps2", 1.0)))
        scen = harness.Scenario(model=model, n=n,
                                replications=int(cfg.get("replications", 500)),
                                level=level, B=B, k=k, seed=args.seed)
        report = harness.run_scenario(scen)
        harness.emit_results([(scen, report)],
                             os.path.join(args.out, "scenarios.csv"))
    conv = harness.run_convergence_demo()
    harness.emit_convergence(conv, os.path.join(args.out, "convergence.csv"))
    return 0


_CHANNELS = {
    "linear_gaussian": lambda p: ChannelMoments(
        mean_fn=lambda x: p.get("beta", 1.0) * np.asarray(x),
        cond_var_fn=lambda x: np.full(np.asarray(x).shape, p.get("sigma2", 1.0)),
        domain=((p.get("domain_lo", -100.0), p.get("domain_hi", 100.0)),)),
    "saturating": lambda p: ChannelMoments(
        mean_fn=lambda x: np.asarray(x) / (1.0 + np.abs(np.asarray(x))),
        cond_var_fn=lambda x: p.get("noise_scale", 0.01) * (1.0 + np.asarray(x)),
        domain=((p.get("domain_lo", 0.0), p.get("domain_hi", 10.0)),)),
    "input_scaled_noise": lambda p: ChannelMoments(
        mean_fn=lambda x: np.asarray(x),
        cond_var_fn=lambda x: p.get("sigma2", 1.0) * (1.0 + np.asarray(x) ** 2),
        domain=((p.get("domain_lo", -10.0), p.get("domain_hi", 10.0)),)),
}


def _cmd_capacity(args) -> int:
    cfg = {k: float(v) if v.replace(".", "", 1).replace("-", "", 1).isdigit() else v
           for k, v in _read_config(args.config).items()}
    name = cfg.get("channel", "linear_gaussian")
    if name not in _CHANNELS:
        raise SystemExit(f"unknown channel '{name}'")
    channel = _CHANNELS[name](cfg)
    box = SearchBox(mean_lo=[cfg.get("mean_lo", -1.0)],
                    mean_hi=[cfg.get("mean_hi", 1.0)],
                    log_sd_lo=[cfg.get("log_sd_lo", -3.0)],
                    log_sd_hi=[cfg.get("log_sd_hi", 0.0)])
    res = maximize_capacity_bound(channel, box,
                                  budget=int(cfg.get("budget", 200)),
                                  mc_draws=int(cfg.get("mc_draws", 10000)),
                                  seed=args.seed)
    print(f"bound_nats={res.bound.nats:.6f}")
    print(f"bound_bits={res.bound.bits:.6f}")
    print(f"mc_stderr_nats={res.bound.mc_stderr:.6e}")
    print(f"pseudo_mean={res.pseudo.mean[0]:.6f}")
    print(f"pseudo_var={res.pseudo.covariance[0, 0]:.6e}")
    print(f"budget_exhausted={res.budget_exhausted}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nubound",
        description="Regression-based lower bounds on mutual information and capacity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("knnmi", help="k-NN mutual information estimate from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=_cmd_knnmi)

    p = sub.add_parser("estimate", help="nu-hat bound, BCa interval and composite")
    p.add_argument("--input", required=True)
    p.add_argument("--x-cdf", default="empirical")
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--B", type=int, default=2000)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("truth", help="ground-truth mutual information of a model")
    p.add_argument("--model", choices=sorted(_MODEL_NAMES), required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma-eps2", type=float, default=1.0)
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--support", default="0,2")
    p.add_argument("--cond-sd", type=float, default=0.1)
    p.add_argument("--M", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_truth)

    p = sub.add_parser("simulate", help="replication study / panel run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("capacity", help="maximize the capacity lower bound")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_capacity)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
