"""Flat-torus geometry: canonical representatives, distances, displacements.

Points of the d-torus are held as their canonical representative in
[0, 1)^d.  The squared metric separates across coordinates, so every
distance here is a per-coordinate minimal integer shift.
"""

from __future__ import annotations

import numpy as np

from ._core import pairwise_sq_torus_dist


def wrap(x):
    """Canonical representative in [0, 1)^d.  Total: never errors.

    Plain ``% 1.0`` can round up to exactly 1.0 for tiny negative inputs;
    the correction keeps the half-open invariant.
    """
    w = np.asarray(x, dtype=np.float64) % 1.0
    return np.where(w >= 1.0, w - 1.0, w)


def displacement(x, y):
    """Minimal representative of y - x, per coordinate in [-1/2, 1/2)."""
    d = (np.asarray(y, dtype=np.float64) - np.asarray(x, dtype=np.float64)) % 1.0
    d = np.where(d >= 1.0, d - 1.0, d)
    return np.where(d >= 0.5, d - 1.0, d)


def torus_distance(x, y):
    """Distance on the torus: min over integer shifts of the Euclidean norm."""
    diff = np.abs(wrap(as_coords(x)) - wrap(as_coords(y)))
    diff = np.minimum(diff, 1.0 - diff)
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(d) if d.ndim == 0 else d


def as_coords(x):
    """Accept a TorusPoint or a bare coordinate array."""
    return getattr(x, "coords", x)


class TorusPoint:
    """A point of the flat d-torus, stored wrapped and immutable."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        c = np.atleast_1d(wrap(coords)).astype(np.float64)
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    @property
    def d(self) -> int:
        return self.coords.shape[0]

    def __add__(self, velocity):
        return TorusPoint(self.coords + np.asarray(velocity, dtype=np.float64))

    def distance(self, other) -> float:
        return float(torus_distance(self.coords, as_coords(other)))

    def __repr__(self):
        return f"TorusPoint({self.coords.tolist()})"


__all__ = [
    "wrap",
    "displacement",
    "torus_distance",
    "pairwise_sq_torus_dist",
    "as_coords",
    "TorusPoint",
]
