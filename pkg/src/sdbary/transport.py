"""Semidiscrete transport kernel.

Power-cell assignment, the c-transform, Monte Carlo cell statistics and the
stochastic dual objective. Scores are always formed directly as
``|y - x_i|^2 - phi_i``; the expanded dot-product form loses digits when the
weights are small differences of large squared distances.

Batches are processed in fixed chunks of ``CHUNK`` samples whose partial
sums are merged in chunk order, so results do not depend on how many worker
threads process the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numba as nb
import numpy as np

from .domain import CellStats, InvalidInputError, Support, WeightVector

CHUNK = 8192
# Supports at least this large are assigned tile by tile with candidate culling.
TILED_MIN = 16
TILE_SIZE = 32


@nb.njit(cache=True, nogil=True)
def _assign_kernel(y, xt, phi, labels, scores):
    K, D = y.shape
    m = xt.shape[1]
    s = np.empty(m)
    for k in range(K):
        for i in range(m):
            s[i] = -phi[i]
        for d in range(D):
            yd = y[k, d]
            for i in range(m):
                t = yd - xt[d, i]
                s[i] += t * t
        best = s[0]
        bi = 0
        for i in range(1, m):
            if s[i] < best:  # strict: the smallest index wins ties
                best = s[i]
                bi = i
        labels[k] = bi
        scores[k] = best


@nb.njit(cache=True, nogil=True)
def _tiled_kernel(y, xt, phi, tile_size, labels, scores):
    # Samples are bucketed on a grid over the first one or two axes. For each
    # tile, every point whose lowest possible score over the tile's bounding
    # box exceeds the smallest guaranteed score is dropped; the survivors are
    # scanned in index order exactly like the dense kernel, so results agree
    # bitwise.
    K, D = y.shape
    m = xt.shape[1]
    A = 2 if D >= 2 else 1
    G = max(1, int((K / tile_size) ** (1.0 / A)))
    lo = np.empty(A)
    span = np.empty(A)
    for a in range(A):
        mn = y[0, a]
        mx = y[0, a]
        for k in range(K):
            mn = min(mn, y[k, a])
            mx = max(mx, y[k, a])
        lo[a] = mn
        span[a] = mx - mn
    tile = np.zeros(K, np.int64)
    for k in range(K):
        t = 0
        for a in range(A):
            c = 0
            if span[a] > 0:
                c = min(G - 1, int((y[k, a] - lo[a]) / span[a] * G))
            t = t * G + c
        tile[k] = t
    # counting sort by tile keeps samples of a tile in their original order
    ntiles = G**A
    offs = np.zeros(ntiles + 1, np.int64)
    for k in range(K):
        offs[tile[k] + 1] += 1
    for t in range(ntiles):
        offs[t + 1] += offs[t]
    idx = np.empty(K, np.int64)
    fill = offs[:-1].copy()
    for k in range(K):
        idx[fill[tile[k]]] = k
        fill[tile[k]] += 1
    bmin = np.empty(D)
    bmax = np.empty(D)
    cand = np.empty(m, np.int64)
    lb = np.empty(m)
    s = np.empty(m)
    start = 0
    while start < K:
        t = tile[idx[start]]
        stop = start
        while stop < K and tile[idx[stop]] == t:
            stop += 1
        for d in range(D):
            bmin[d] = y[idx[start], d]
            bmax[d] = bmin[d]
        for r in range(start + 1, stop):
            k = idx[r]
            for d in range(D):
                bmin[d] = min(bmin[d], y[k, d])
                bmax[d] = max(bmax[d], y[k, d])
        ub = np.inf
        for i in range(m):
            near = -phi[i]
            far = -phi[i]
            for d in range(D):
                x = xt[d, i]
                g = 0.0
                if x < bmin[d]:
                    g = bmin[d] - x
                elif x > bmax[d]:
                    g = x - bmax[d]
                near += g * g
                f = max(abs(x - bmin[d]), abs(x - bmax[d]))
                far += f * f
            lb[i] = near
            ub = min(ub, far)
        nc = 0
        slack = 1e-12 * (abs(ub) + 1.0)
        for i in range(m):
            if lb[i] <= ub + slack + 1e-12 * abs(lb[i]):
                cand[nc] = i
                nc += 1
        for r in range(start, stop):
            k = idx[r]
            for c in range(nc):
                s[c] = -phi[cand[c]]
            for d in range(D):
                yd = y[k, d]
                for c in range(nc):
                    u = yd - xt[d, cand[c]]
                    s[c] += u * u
            best = s[0]
            bi = cand[0]
            for c in range(1, nc):
                if s[c] < best:
                    best = s[c]
                    bi = cand[c]
            labels[k] = bi
            scores[k] = best
        start = stop


@nb.njit(cache=True, nogil=True)
def _reduce_kernel(y, labels, scores, m, counts, sums):
    K, D = y.shape
    total = 0.0
    total_sq = 0.0
    for k in range(K):
        i = labels[k]
        counts[i] += 1
        for d in range(D):
            sums[i, d] += y[k, d]
        total += scores[k]
        total_sq += scores[k] * scores[k]
    return total, total_sq


def _points(support):
    if isinstance(support, Support):
        return support.points
    pts = np.asarray(support, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def _weights(weights, m):
    vals = weights.values if isinstance(weights, WeightVector) else weights
    phi = np.ascontiguousarray(vals, dtype=np.float64).ravel()
    if phi.size != m:
        raise InvalidInputError(f"expected {m} weights, got {phi.size}")
    return phi


def _prepare(y, support, weights):
    x = _points(support)
    if x.shape[0] == 0:
        raise InvalidInputError("support is empty")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[1] != x.shape[1]:
        raise InvalidInputError(f"dimension mismatch: samples {y.shape[1]} vs support {x.shape[1]}")
    return y, np.ascontiguousarray(x.T), _weights(weights, x.shape[0])


class _Kernel:
    """Assignment of samples to power cells for one (support, weights) pair."""

    def __init__(self, xt, phi, tiled=None):
        self.xt, self.phi = xt, phi
        self.tiled = (xt.shape[1] >= TILED_MIN and bool(np.all(np.isfinite(phi)))) if tiled is None else tiled

    def __call__(self, y):
        labels = np.empty(y.shape[0], np.int64)
        scores = np.empty(y.shape[0])
        if self.tiled and y.shape[0] > 0:
            _tiled_kernel(y, self.xt, self.phi, TILE_SIZE, labels, scores)
        else:
            _assign_kernel(y, self.xt, self.phi, labels, scores)
        return labels, scores


def power_cells(y, support, weights, *, tiled=None):
    """Cell index and c-transform value for each row of ``y``.

    ``tiled`` forces (True) or disables (False) the culled kernel; both
    give identical results.
    """
    y, xt, phi = _prepare(y, support, weights)
    return _Kernel(xt, phi, tiled)(y)


def assign_cell(y, support, weights) -> int:
    """Index of the power cell containing ``y`` (argmin of |y - x_i|^2 - phi_i)."""
    labels, _ = power_cells(y, support, weights)
    return int(labels[0])


def c_transform(y, support, weights) -> float:
    """min_i (|y - x_i|^2 - phi_i) for a single point ``y``."""
    _, scores = power_cells(y, support, weights)
    return float(scores[0])


def _chunk_stats(y, kernel, m):
    labels, scores = kernel(y)
    counts = np.zeros(m, np.int64)
    sums = np.zeros((m, y.shape[1]))
    total, total_sq = _reduce_kernel(y, labels, scores, m, counts, sums)
    return CellStats(counts, sums, y.shape[0], total, total_sq)


def cell_stats_from_samples(y, support, weights, workers=1) -> CellStats:
    """Cell statistics for a fixed batch (common random numbers)."""
    y, xt, phi = _prepare(y, support, weights)
    kernel = _Kernel(xt, phi)
    m = xt.shape[1]
    chunks = [y[s : s + CHUNK] for s in range(0, y.shape[0], CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _chunk_stats(c, kernel, m), chunks))
    else:
        parts = [_chunk_stats(c, kernel, m) for c in chunks]
    return CellStats.merge(parts)


def estimate_cell_stats(sampler, support, weights, K, rng, workers=1) -> CellStats:
    """Monte Carlo masses and centroids of the power cells under ``sampler``.

    Draws ``K`` fresh samples from ``rng``. Empty cells come back with
    zero mass and an undefined (NaN) centroid.
    """
    if int(K) < 1:
        raise InvalidInputError("K must be at least 1")
    y = sampler.draw_batch(rng, K)
    return cell_stats_from_samples(y, support, weights, workers)


def grad_weights(stats, m=None) -> np.ndarray:
    """Per-measure ascent direction 1/m - a_i (no 1/N factor)."""
    masses = stats.masses if isinstance(stats, CellStats) else np.asarray(stats, dtype=np.float64)
    m = masses.size if m is None else int(m)
    if masses.size != m:
        raise InvalidInputError(f"expected {m} masses, got {masses.size}")
    return 1.0 / m - masses


def grad_norm_sq_unbiased(stats: CellStats) -> float:
    """Unbiased estimate of |1/m - a|^2 from one batch.

    The raw squared norm of the estimated gradient carries the sampling
    variance sum_i a_i (1 - a_i) / K; it is subtracted here, so the result
    can dip below zero when the true gradient vanishes.
    """
    K = stats.sample_count
    g = grad_weights(stats)
    raw = float(g @ g)
    if K < 2:
        return raw
    a = stats.masses
    return raw - float(np.sum(a * (1.0 - a))) / (K - 1)


class ObjectiveEstimate(NamedTuple):
    value: float
    stderr: float


def dual_objective(stats: CellStats, weights) -> float:
    """mean(phi) + mean of the c-transform values behind ``stats``."""
    phi = _weights(weights, stats.m)
    return float(phi.mean() + stats.mean_cost)


def estimate_objective(support, weights_per_measure, samplers, K, rng, workers=1) -> ObjectiveEstimate:
    """Monte Carlo estimate of (1/N) sum_j [mean(phi_j) + E_{mu_j} cbar_j].

    Measures are sampled one after the other from ``rng``. At optimal
    weights this estimates the average squared W2 distance to the inputs.
    """
    samplers = list(samplers)
    weights_per_measure = list(weights_per_measure)
    if len(samplers) != len(weights_per_measure) or not samplers:
        raise InvalidInputError("need one weight vector per measure")
    values, variances = [], []
    for sampler, w in zip(samplers, weights_per_measure):
        stats = estimate_cell_stats(sampler, support, w, K, rng, workers)
        values.append(dual_objective(stats, w))
        variances.append(stats.cost_stderr**2)
    N = len(samplers)
    return ObjectiveEstimate(float(np.sum(values) / N), float(np.sqrt(np.sum(variances)) / N))
