"""One-to-one Gaussianizing maps: probability integral transform composed with
the standard normal quantile."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .errors import SupportViolationError

# Tail clipping keeps the quantile map finite at sample extremes.
_TAIL_CLIP = 1e-15


class MapKind(enum.Enum):
    KNOWN_CDF = "known_cdf"
    EMPIRICAL_RANK = "empirical_rank"


@dataclass(frozen=True)
class GaussianizingMap:
    """Strictly increasing map x -> Phi^{-1}(F_X(x)).

    KnownCdf is the default and matches the inference setting where the input
    distribution is known. EmpiricalRank (Blom scores) is offered for real
    data and falls outside that setting.
    """

    kind: MapKind
    cdf: Optional[Callable] = None
    ppf: Optional[Callable] = None
    support: tuple[float, float] = (-np.inf, np.inf)


def known_cdf_map(cdf: Callable, ppf: Optional[Callable] = None,
                  support: tuple[float, float] = (-np.inf, np.inf)) -> GaussianizingMap:
    return GaussianizingMap(kind=MapKind.KNOWN_CDF, cdf=cdf, ppf=ppf, support=support)


def empirical_rank_map() -> GaussianizingMap:
    return GaussianizingMap(kind=MapKind.EMPIRICAL_RANK)


def blom_scores(x: np.ndarray) -> np.ndarray:
    """Normal scores Phi^{-1}((rank - 3/8) / (N + 1/4)) with average ranks for
    ties, deterministically jittered by index order before the quantile map."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    ranks = rankdata(x, method="average")
    if np.unique(x).size < n:
        ranks = ranks + 1e-9 * np.arange(n)
    return ndtri((ranks - 0.375) / (n + 0.25))


def gaussianize(x, gmap: GaussianizingMap) -> np.ndarray:
    """Apply the Gaussianizing map to a sample vector."""
    x = np.asarray(x, dtype=float).ravel()
    if gmap.kind is MapKind.EMPIRICAL_RANK:
        if x.size < 3:
            raise ValueError("EmpiricalRank requires a sample of size >= 3")
        return blom_scores(x)
    u = np.asarray(gmap.cdf(x), dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise SupportViolationError("some observations map to CDF value 0 or 1")
    return ndtri(np.clip(u, _TAIL_CLIP, 1.0 - _TAIL_CLIP))


def invert(xtilde, gmap: GaussianizingMap) -> np.ndarray:
    """Map standard-normal values back to the original scale (KnownCdf only)."""
    if gmap.kind is not MapKind.KNOWN_CDF:
        raise ValueError("inverse is defined only for KnownCdf maps")
    u = ndtr(np.asarray(xtilde, dtype=float).ravel())
    if gmap.ppf is not None:
        return np.asarray(gmap.ppf(u), dtype=float)
    lo, hi = gmap.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        lo, hi = -1e12, 1e12
    return np.array([brentq(lambda t, ui=ui: gmap.cdf(t) - ui, lo, hi, xtol=1e-12) for ui in u])


def fit_empirical_table(x) -> np.ndarray:
    """Sorted (x, xtilde) table of an empirical map, for reproducibility dumps."""
    x = np.asarray(x, dtype=float).ravel()
    scores = blom_scores(x)
    order = np.argsort(x, kind="stable")
    return np.column_stack([x[order], scores[order]])


def save_empirical_table(table: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("# x xtilde\n")
        for xi, ti in table:
            fh.write(f"{float(xi)!r} {float(ti)!r}\n")


def load_empirical_table(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b = line.split()
            rows.append((float(a), float(b)))
    return np.array(rows)
