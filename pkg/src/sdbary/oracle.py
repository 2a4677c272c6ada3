"""Deterministic reference computations for tests.

Nothing here samples: cell statistics of a uniform box come from a midpoint
grid, and discrete transport costs from an exact linear program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .domain import CellStats, InvalidInputError, Support
from .samplers import Empirical, UniformBox, from_spec
from .transport import cell_stats_from_samples

MAX_EXACT = 12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms with positive masses summing to one."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.asarray(self.masses, dtype=np.float64).ravel()
        if pts.shape[0] != w.size or w.size == 0:
            raise InvalidInputError("need one positive mass per atom")
        if np.any(w <= 0):
            raise InvalidInputError("atom masses must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"atom masses sum to {w.sum():.17g}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", w)

    @classmethod
    def from_empirical(cls, sampler: Empirical):
        n = sampler.atoms.shape[0]
        return cls(sampler.atoms, np.full(n, 1.0 / n))

    @property
    def size(self):
        return self.masses.size


def grid_points(box_lower, box_upper, resolution):
    """Midpoints of a ``resolution``-per-axis grid over the box."""
    lo = np.asarray(box_lower, dtype=np.float64)
    hi = np.asarray(box_upper, dtype=np.float64)
    axes = [lo[d] + (np.arange(resolution) + 0.5) * (hi[d] - lo[d]) / resolution for d in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def exact_cell_stats_grid(spec, support, weights, grid_resolution=256) -> CellStats:
    """Midpoint-rule cell masses and centroids for a uniform box.

    ``spec`` is a UniformBox sampler or its spec dict. Each grid midpoint
    stands for an equal share of the box, so the cell masses are exact up to
    the cells cut by a power-cell boundary, O(1/resolution).
    """
    sampler = from_spec(spec) if isinstance(spec, dict) else spec
    if not isinstance(sampler, UniformBox):
        raise InvalidInputError("grid quadrature supports uniform boxes only")
    if int(grid_resolution) < 64:
        raise InvalidInputError("grid_resolution must be at least 64")
    y = grid_points(sampler.lower, sampler.upper, int(grid_resolution))
    return cell_stats_from_samples(y, support, weights)


def exact_w2_discrete(mu: DiscreteMeasure, support) -> tuple[float, np.ndarray]:
    """Exact squared-distance transport from ``mu`` to uniform mass on ``support``.

    Returns the optimal cost and plan (atoms x support points). Solved as a
    transportation linear program; sizes are capped at 12 x 12.
    """
    if isinstance(mu, Empirical):
        mu = DiscreteMeasure.from_empirical(mu)
    x = support.points if isinstance(support, Support) else np.atleast_2d(np.asarray(support, dtype=np.float64))
    n, m = mu.size, x.shape[0]
    if n > MAX_EXACT or m > MAX_EXACT:
        raise InvalidInputError(f"exact solve limited to {MAX_EXACT} x {MAX_EXACT}, got {n} x {m}")
    if x.shape[1] != mu.points.shape[1]:
        raise InvalidInputError("dimension mismatch between atoms and support")
    cost = ((mu.points[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    rows = np.kron(np.eye(n), np.ones(m))
    cols = np.kron(np.ones(n), np.eye(m))
    b = np.concatenate([mu.masses, np.full(m, 1.0 / m)])
    # one marginal constraint is redundant; drop it to keep the system full rank
    A = np.vstack([rows, cols])[:-1]
    res = linprog(cost.ravel(), A_eq=A, b_eq=b[:-1], bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise InvalidInputError(f"transport LP failed: {res.message}")
    plan = np.maximum(res.x.reshape(n, m), 0.0)
    return float((plan * cost).sum()), plan
