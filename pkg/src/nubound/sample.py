"""Paired input/output observations, the unit of all estimation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class JointSample:
    """Paired (x, z) observations. Scalar input and output only."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        z = np.asarray(self.z, dtype=float).ravel()
        if x.shape != z.shape:
            raise ValueError("x and z must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.size

    def take(self, indices) -> "JointSample":
        return JointSample(self.x[indices], self.z[indices])


def read_csv(path) -> JointSample:
    """Read a sample from a CSV file with header ``x,z``."""
    xs, zs = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames[:2]] != ["x", "z"]:
            raise ValueError(f"{path}: expected header 'x,z', got {reader.fieldnames}")
        for row in reader:
            xs.append(float(row["x"]))
            zs.append(float(row["z"]))
    return JointSample(np.array(xs), np.array(zs))


def write_csv(sample: JointSample, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "z"])
        for xi, zi in zip(sample.x, sample.z):
            writer.writerow([repr(float(xi)), repr(float(zi))])
