"""Bounded open regions: an open box intersected with open half-spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class Region:
    """``{x : lo < x < hi, a_j . x < b_j for all j}``.

    ``halfspaces`` holds tuples ``(a, b)`` with ``a`` a length-d tuple.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    halfspaces: tuple[tuple[tuple[float, ...], float], ...] = field(default=())
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners must have the same dimension")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent in every axis")
        for a, _ in self.halfspaces:
            if len(a) != len(self.lo):
                raise ValueError("half-space normal has the wrong dimension")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        """Strict membership test, optionally at distance > ``margin`` from the boundary.

        ``x`` has shape ``(n, d)`` (or ``(d,)``); returns a boolean array of length n.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo) + margin
        hi = np.asarray(self.hi) - margin
        inside = np.all((x > lo) & (x < hi), axis=1)
        for a, b in self.halfspaces:
            a = np.asarray(a, dtype=float)
            inside &= x @ a < b - margin * np.linalg.norm(a)
        return inside

    def grid(self, step: float, margin: float = 0.0) -> np.ndarray:
        """Points of the lattice ``step * Z^d`` lying inside the region."""
        axes = []
        for l, h in zip(self.lo, self.hi):
            i0 = int(np.floor(l / step)) - 1
            i1 = int(np.ceil(h / step)) + 1
            axes.append(np.arange(i0, i1 + 1) * step)
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return pts[self.contains(pts, margin)]

    def quasi_random(self, count: int, margin: float = 0.0, seed: int = 0) -> np.ndarray:
        """First ``count`` Halton points of the bounding box that fall inside the region."""
        sampler = qmc.Halton(d=self.dim, scramble=seed != 0, seed=seed or None)
        lo = np.asarray(self.lo)
        span = np.asarray(self.hi) - lo
        out = []
        have = 0
        while have < count:
            batch = lo + span * sampler.random(max(64, 2 * count))
            batch = batch[self.contains(batch, margin)]
            out.append(batch)
            have += len(batch)
        return np.concatenate(out)[:count]

    def random(self, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
        """Uniform random points inside the region by rejection from the bounding box."""
        lo = np.asarray(self.lo)
        span = np.asarray(self.hi) - lo
        out = np.empty((0, self.dim))
        while len(out) < count:
            batch = lo + span * rng.random((2 * count + 8, self.dim))
            out = np.concatenate([out, batch[self.contains(batch, margin)]])
        return out[:count]

    def to_dict(self) -> dict:
        return {
            "box": [list(self.lo), list(self.hi)],
            "halfspaces": [list(a) + [b] for a, b in self.halfspaces],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        lo, hi = data["box"]
        hs = tuple((tuple(float(v) for v in row[:-1]), float(row[-1])) for row in data.get("halfspaces", []))
        return cls(tuple(float(v) for v in lo), tuple(float(v) for v in hi), hs, data.get("name"))


def unit_cube(d: int) -> Region:
    return Region((0.0,) * d, (1.0,) * d, name="unit")


def interval(a: float, b: float) -> Region:
    return Region((float(a),), (float(b),))


def upper_triangle() -> Region:
    """``A_U = {(s, t): 0 < s < t < 1}``."""
    return Region((0.0, 0.0), (1.0, 1.0), (((1.0, -1.0), 0.0),), name="AU")


def lower_triangle() -> Region:
    """``A_L = {(s, t): 0 < t < s < 1}``."""
    return Region((0.0, 0.0), (1.0, 1.0), (((-1.0, 1.0), 0.0),), name="AL")


NAMED_REGIONS = {
    "unit1": lambda: unit_cube(1),
    "unit2": lambda: unit_cube(2),
    "AU": upper_triangle,
    "AL": lower_triangle,
}
