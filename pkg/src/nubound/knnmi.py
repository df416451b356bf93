"""Kraskov-type k-nearest-neighbor mutual information, second variant, k = 3.

Brute-force O(N^2) neighbor search under the max norm; the simulation study
uses N in {25, 50} and the calibration checks N = 2000, where full distance
matrices are still cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .errors import DuplicatePointsError, TooFewPointsError
from .sample import JointSample


@dataclass(frozen=True)
class KnnConfig:
    k: int = 3
    jitter_scale: float = 0.0
    jitter_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.jitter_scale < 0:
            raise ValueError("jitter_scale must be nonnegative")


def estimate_mi(sample: JointSample, cfg: KnnConfig = KnnConfig()) -> float:
    """Mutual information estimate in nats; may be negative and is returned raw.

    Second Kraskov variant: the per-coordinate search radii are the half edge
    lengths of the smallest rectangle containing the k nearest joint-space
    neighbors under the max norm, with boundary points counted (<=) and
    distance ties broken by index order.
    """
    x = np.asarray(sample.x, dtype=float)
    z = np.asarray(sample.z, dtype=float)
    n = x.size
    if n < cfg.k + 1:
        raise TooFewPointsError(f"need at least k + 1 = {cfg.k + 1} points, got {n}")

    if cfg.jitter_scale > 0:
        rng = np.random.default_rng(cfg.jitter_seed)
        x = x + rng.normal(0.0, cfg.jitter_scale, n)
        z = z + rng.normal(0.0, cfg.jitter_scale, n)
    else:
        joint = np.column_stack([x, z])
        if np.unique(joint, axis=0).shape[0] < n:
            raise DuplicatePointsError(
                "exact duplicate joint points; enable jitter_scale to break ties"
            )

    dx = np.abs(x[:, None] - x[None, :])
    dz = np.abs(z[:, None] - z[None, :])
    joint_dist = np.maximum(dx, dz)
    np.fill_diagonal(joint_dist, np.inf)

    # Stable sort keeps equal distances ordered by index.
    order = np.argsort(joint_dist, axis=1, kind="stable")
    knn = order[:, : cfg.k]
    rows = np.arange(n)[:, None]
    # Half edge lengths of the smallest axis-aligned rectangle containing the
    # k nearest joint-space neighbors.
    eps_x = dx[rows, knn].max(axis=1)
    eps_z = dz[rows, knn].max(axis=1)

    # Boundary convention: points at exactly eps/2 are counted; the k-th
    # neighbor itself is always counted, so the counts are >= 1.
    n_x = np.count_nonzero(dx <= eps_x[:, None], axis=1) - 1
    n_z = np.count_nonzero(dz <= eps_z[:, None], axis=1) - 1

    return float(
        digamma(cfg.k)
        - 1.0 / cfg.k
        - np.mean(digamma(n_x) + digamma(n_z))
        + digamma(n)
    )
