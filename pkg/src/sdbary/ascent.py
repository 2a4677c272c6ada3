"""Stochastic ascent on the dual weights of one input measure.

Momentum iteration with a fresh sample batch per step::

    z <- beta * z + (1/m - a_hat(w))
    w <- w + alpha * z

With a constant step the iterates never settle: sampling noise keeps them
in a ball whose squared gradient norm is roughly 0.15 / K on the unit
square, above the default threshold of 1e-6 for any K below ~2e5. The
returned weights are therefore the exponential moving average ``w_bar`` of
the iterates (window ``1 / (1 - smoothing)``), and the stopping test
estimates ``|grad(w_bar)|^2``:

* the same moving average of the batch gradients equals ``grad(w_bar)``
  wherever the gradient is locally affine, plus averaged noise whose
  variance is known from the batch masses and is subtracted;
* the moving average is only a trigger: while the iterates still travel
  far, the gradient is not affine over their spread and the average reads
  low. A candidate stop is therefore confirmed by an unbiased estimate of
  ``|grad(w_bar)|^2`` from one fresh batch large enough that its standard
  deviation is about epsilon / 3. That batch also rejects false stops where
  the gradient jumps (point masses, measures on curves).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .domain import CellStats, InvalidInputError, NumericFailureError, Support, WeightVector
from .transport import dual_objective, estimate_cell_stats, grad_norm_sq_unbiased, grad_weights

log = logging.getLogger(__name__)

# Substream index of the confirmation batches; iteration batches use 1..max_iters.
_CHECK = 1 << 40
# Confirmation batches are at most this many times the iteration batch size.
CHECK_CAP = 64


@dataclass(frozen=True)
class AscentParams:
    """Step size, momentum, stopping threshold and batch size of the ascent."""

    alpha: float = 1e-3
    beta: float = 0.99
    epsilon: float = 1e-6
    max_iters: int = 50_000
    K: int = 65536
    smoothing: float = 0.99

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidInputError("alpha must be positive")
        if not 0 <= self.beta < 1:
            raise InvalidInputError("beta must be in [0,1)")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInputError("epsilon must be positive")
        if int(self.max_iters) < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if int(self.K) < 2:
            raise InvalidInputError("K must be at least 2")
        if not 0 <= self.smoothing < 1:
            raise InvalidInputError("smoothing must be in [0,1)")

    def noise_floor(self, m) -> float:
        """Expected squared norm of a pure-noise batch gradient, sum_i a(1-a)/K at balance."""
        return (1.0 - 1.0 / m) / self.K


@dataclass
class AscentReport:
    final_weights: WeightVector
    iterations: int
    final_grad_norm_sq: float
    converged: bool
    last_stats: CellStats = field(repr=False)
    trace: dict | None = field(default=None, repr=False)
    checks: int = 0


def check_batch_size(masses, params: AscentParams) -> int:
    """Samples needed for the unbiased squared-norm estimate to have sd near epsilon / 3.

    At balance that sd is about sqrt(2 sum_i (a_i (1 - a_i))^2) / K_check.
    """
    v = masses * (1.0 - masses)
    need = 3.0 * math.sqrt(2.0 * float(v @ v)) / params.epsilon
    return int(min(max(math.ceil(need), params.K), CHECK_CAP * params.K))


def ascend_weights(sampler, support: Support, initial, params: AscentParams, seed, *, workers=1, trace=False) -> AscentReport:
    """Maximize the dual objective of one measure over its weights.

    ``seed`` (int or SeedSequence) roots the per-iteration substreams, so
    the result is reproducible and independent of other measures. The
    ascent gives up with ``converged=False`` after ``max_iters`` batches;
    measures for which no balancing weights exist end that way.

    The report's ``last_stats`` always come from the confirmation batch
    drawn at the returned weights, and ``final_grad_norm_sq`` is the
    unbiased squared-norm estimate from that batch.

    Raises NumericFailureError if the weights become non-finite.
    """
    m = support.m
    owner = initial.owner if isinstance(initial, WeightVector) else 0
    w = np.array(initial.values if isinstance(initial, WeightVector) else initial, dtype=np.float64).ravel()
    if w.size != m:
        raise InvalidInputError(f"initial weights have length {w.size}, support has {m} points")
    w -= w.mean()
    z = np.zeros(m)

    s = params.smoothing
    window = max(1, int(round(1.0 / (1.0 - s))))
    if math.sqrt(2.0 / m) * params.noise_floor(m) * (1 - s) / (1 + s) > 0.5 * params.epsilon:
        log.warning(
            "epsilon=%g is below the averaged noise floor for m=%d, K=%d; the ascent may run to max_iters",
            params.epsilon, m, params.K,
        )

    # Unnormalized moving averages and the bookkeeping for their normalization.
    w_acc = np.zeros(m)
    g_acc = np.zeros(m)
    var_acc = 0.0
    sq_acc = 0.0  # sum of squared averaging coefficients, unnormalized
    wt = 0.0

    rows = [] if trace else None
    stat = math.inf
    cooldown_until = 0
    checks = 0
    converged = False
    final_stats = None
    w_bar = w.copy()
    k = 0
    for k in range(1, int(params.max_iters) + 1):
        stats = estimate_cell_stats(sampler, support, w, params.K, streams.generator(seed, k), workers)
        g = grad_weights(stats, m)
        a = stats.masses
        batch_var = float(np.sum(a * (1.0 - a))) / (params.K - 1)

        w_acc = s * w_acc + (1.0 - s) * w
        g_acc = s * g_acc + (1.0 - s) * g
        var_acc = s * s * var_acc + (1.0 - s) ** 2 * batch_var
        sq_acc = s * s * sq_acc + (1.0 - s) ** 2
        wt = s * wt + (1.0 - s)
        w_bar = w_acc / wt
        g_bar = g_acc / wt
        stat = float(g_bar @ g_bar) - var_acc / (wt * wt)
        # sd of the statistic at a balanced state; below epsilon/2 the test is meaningful
        stat_sd = math.sqrt(2.0 / m) * params.noise_floor(m) * sq_acc / (wt * wt)

        if rows is not None:
            rows.append((grad_norm_sq_unbiased(stats), stat, dual_objective(stats, w), stats.cost_stderr))

        if stat <= params.epsilon and stat_sd <= 0.5 * params.epsilon and k >= cooldown_until:
            checks += 1
            check = estimate_cell_stats(sampler, support, w_bar, check_batch_size(a, params), streams.generator(seed, _CHECK + k), workers)
            q = grad_norm_sq_unbiased(check)
            final_stats = check
            if q <= params.epsilon:
                converged = True
                break
            cooldown_until = k + window

        with np.errstate(over="ignore", invalid="ignore"):
            z = params.beta * z + g
            w = w + params.alpha * z
            w -= w.mean()
        if not np.all(np.isfinite(w)):
            raise NumericFailureError(f"weights became non-finite at ascent iteration {k}", iteration=k)

    if not converged:
        masses = stats.masses if final_stats is None else final_stats.masses
        final_stats = estimate_cell_stats(sampler, support, w_bar, check_batch_size(masses, params), streams.generator(seed, _CHECK), workers)
        q = grad_norm_sq_unbiased(final_stats)
        converged = q <= params.epsilon

    out = None
    if rows is not None:
        arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
        out = {"grad_norm_sq": arr[:, 0], "smoothed": arr[:, 1], "objective": arr[:, 2], "stderr": arr[:, 3]}
    return AscentReport(WeightVector(w_bar, owner), k, float(q), converged, final_stats, out, checks)
