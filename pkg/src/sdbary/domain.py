"""Core value types shared across the package.

All arrays stored on these types are float64 and flagged read-only, so
instances can be handed to worker threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class NumericFailureError(RuntimeError):
    """Raised when an iteration produces non-finite values."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_point(p):
    """Coerce ``p`` to a finite 1-d float64 array."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"a point must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("point coordinates must be finite")
    return arr


def squared_distance(p, q) -> float:
    """Squared Euclidean distance between two points of equal dimension."""
    p = as_point(p)
    q = as_point(q)
    if p.shape != q.shape:
        raise InvalidInputError(f"dimension mismatch: {p.size} vs {q.size}")
    diff = p - q
    return float(np.dot(diff, diff))


@dataclass(frozen=True)
class Support:
    """Ordered point set carrying the uniform measure (1/m) sum of deltas.

    ``points`` has shape (m, D). ``ids`` are stable integer labels, so a
    cell can be followed across snap steps even when points are inserted.
    """

    points: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"support needs at least one point, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("support coordinates must be finite")
        ids = np.arange(pts.shape[0]) if self.ids is None else np.asarray(self.ids)
        if ids.shape != (pts.shape[0],):
            raise InvalidInputError("ids must match the number of points")
        if np.unique(ids).size != ids.size:
            raise InvalidInputError("support ids must be unique")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "ids", _frozen(ids, np.int64))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.m

    def index_of(self, point_id) -> int:
        hits = np.flatnonzero(self.ids == point_id)
        if hits.size == 0:
            raise KeyError(point_id)
        return int(hits[0])

    def with_points(self, points) -> "Support":
        return Support(points, self.ids)

    def append(self, point, point_id=None) -> "Support":
        point = as_point(point)
        if point.size != self.dim:
            raise InvalidInputError(f"dimension mismatch: {point.size} vs {self.dim}")
        if point_id is None:
            point_id = int(self.ids.max()) + 1
        return Support(np.vstack([self.points, point]), np.append(self.ids, point_id))


@dataclass(frozen=True)
class WeightVector:
    """Dual weights of one input measure, one entry per support point.

    Stored mean-zero: a constant shift changes neither the dual objective
    nor any power-cell assignment.
    """

    values: np.ndarray
    owner: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size < 1:
            raise InvalidInputError("weight vector must be non-empty")
        v = v - v.mean()
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def zeros(cls, m, owner=0):
        return cls(np.zeros(m), owner)

    def __len__(self):
        return self.values.size

    def append_zero(self) -> "WeightVector":
        return WeightVector(np.append(self.values, 0.0), self.owner)


@dataclass(frozen=True)
class CellStats:
    """Monte Carlo statistics of the power cells under one input measure.

    ``counts[i]`` is the number of the ``sample_count`` draws landing in
    cell i; ``masses`` and ``centroids`` derive from it. Centroids of empty
    cells are NaN rows and ``defined`` is False there.
    """

    counts: np.ndarray
    sums: np.ndarray
    sample_count: int
    cost_sum: float = 0.0
    cost_sumsq: float = 0.0
    masses: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        sums = np.asarray(self.sums, dtype=np.float64)
        if counts.sum() != self.sample_count:
            raise InvalidInputError("cell counts must add up to the sample count")
        object.__setattr__(self, "counts", _frozen(counts, np.int64))
        object.__setattr__(self, "sums", _frozen(sums))
        object.__setattr__(self, "masses", _frozen(counts / self.sample_count))
        with np.errstate(invalid="ignore", divide="ignore"):
            cen = np.where(counts[:, None] > 0, sums / counts[:, None], np.nan)
        object.__setattr__(self, "centroids", _frozen(cen))

    @property
    def m(self) -> int:
        return self.counts.size

    @property
    def defined(self) -> np.ndarray:
        return self.counts > 0

    @property
    def mean_cost(self) -> float:
        """Sample mean of the c-transform values of the draws."""
        return self.cost_sum / self.sample_count

    @property
    def cost_stderr(self) -> float:
        k = self.sample_count
        if k < 2:
            return 0.0
        mean = self.cost_sum / k
        var = max(self.cost_sumsq / k - mean * mean, 0.0) * k / (k - 1)
        return float(np.sqrt(var / k))

    @classmethod
    def merge(cls, parts) -> "CellStats":
        """Combine partial statistics in the given order."""
        parts = list(parts)
        counts = parts[0].counts.copy()
        sums = parts[0].sums.copy()
        cost, costsq, k = parts[0].cost_sum, parts[0].cost_sumsq, parts[0].sample_count
        for p in parts[1:]:
            counts += p.counts
            sums += p.sums
            cost += p.cost_sum
            costsq += p.cost_sumsq
            k += p.sample_count
        return cls(counts, sums, k, cost, costsq)


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned bounding box of the ambient compact set.

    Degenerate axes (lower == upper) are allowed: a Dirac or a segment
    measure without padding spans zero width along some axis.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper)
        if lo.shape != hi.shape:
            raise InvalidInputError("box corners differ in dimension")
        if np.any(lo > hi):
            raise InvalidInputError("box lower corner must not exceed the upper corner")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, points, tol=0.0) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def sample_uniform(self, rng, n=1) -> np.ndarray:
        u = rng.random((n, self.dim))
        return self.lower + u * (self.upper - self.lower)

    def union(self, other: "DomainBox") -> "DomainBox":
        return DomainBox(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def padded(self, padding) -> "DomainBox":
        return DomainBox(self.lower - padding, self.upper + padding)
