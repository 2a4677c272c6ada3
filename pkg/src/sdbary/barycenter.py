"""Alternating ascent/snap driver and support growth.

One outer iteration re-balances every measure's weights, estimates the
per-measure cell centroids, and moves each movable support point to the
mass-weighted average of its centroids. New points are inserted one at a
time, uniformly in the domain box, with weight 0 in every measure.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import streams
from .ascent import AscentParams, AscentReport, ascend_weights
from .domain import DomainBox, InvalidInputError, NumericFailureError, Support, WeightVector
from .samplers import domain_box
from .transport import ObjectiveEstimate, cell_stats_from_samples, dual_objective, estimate_cell_stats

log = logging.getLogger(__name__)


class GrowthStrategy(enum.Enum):
    GLOBAL = "global"  # every point moves after an insertion
    LOCAL = "local"  # only the inserted point moves


@dataclass(frozen=True)
class PipelineParams:
    ascent: AscentParams = field(default_factory=AscentParams)
    T: int = 10
    strategy: GrowthStrategy = GrowthStrategy.GLOBAL
    initial_m: int | None = None
    init: str = "uniform"
    K_eval: int = 100_000
    padding: float = 0.0
    seed: int = 0
    workers: int = 1
    fresh_snap_masses: bool = False
    displacement_tol: float = 1e-5

    def __post_init__(self):
        if int(self.T) < 1:
            raise InvalidInputError("T must be at least 1")
        if self.init not in ("uniform", "sample"):
            raise InvalidInputError("init must be 'uniform' or 'sample'")
        if int(self.K_eval) < 2:
            raise InvalidInputError("K_eval must be at least 2")
        if int(self.workers) < 1:
            raise InvalidInputError("workers must be at least 1")
        if self.padding < 0:
            raise InvalidInputError("padding must be non-negative")
        if not isinstance(self.strategy, GrowthStrategy):
            object.__setattr__(self, "strategy", GrowthStrategy(self.strategy))


@dataclass
class OuterRecord:
    round: int
    iteration: int
    m: int
    ascent_iterations: list
    grad_norm_sq: list
    converged: list
    objective: float
    objective_stderr: float
    max_displacement: float
    ids: np.ndarray = field(repr=False, default=None)

    def as_dict(self):
        return {
            "round": self.round,
            "iteration": self.iteration,
            "m": self.m,
            "ascent_iterations": list(self.ascent_iterations),
            "grad_norm_sq": list(self.grad_norm_sq),
            "converged": list(self.converged),
            "objective": self.objective,
            "objective_stderr": self.objective_stderr,
            "max_displacement": self.max_displacement,
        }


@dataclass
class BarycenterRun:
    samplers: list
    params: PipelineParams
    box: DomainBox
    support: Support
    weights: list
    history: list = field(default_factory=list)
    initial_objective: ObjectiveEstimate | None = None
    reports: list = field(default_factory=list, repr=False)
    rounds: int = 0
    _eval_batches: list = field(default=None, repr=False)

    @property
    def m(self):
        return self.support.m

    def objectives(self):
        """Objective estimates in order, starting with the one before the first snap."""
        vals = [] if self.initial_objective is None else [self.initial_objective]
        return vals + [ObjectiveEstimate(r.objective, r.objective_stderr) for r in self.history]

    def eval_batches(self):
        if self._eval_batches is None:
            self._eval_batches = [
                s.draw_batch(streams.generator(self.params.seed, streams.EVAL, j), self.params.K_eval)
                for j, s in enumerate(self.samplers)
            ]
        return self._eval_batches

    def evaluate(self, support=None, weights=None) -> ObjectiveEstimate:
        """Dual objective on the run's fixed evaluation batches."""
        support = self.support if support is None else support
        weights = self.weights if weights is None else weights
        vals, var = [], []
        for y, w in zip(self.eval_batches(), weights):
            st = cell_stats_from_samples(y, support, w, self.params.workers)
            vals.append(dual_objective(st, w))
            var.append(st.cost_stderr**2)
        N = len(vals)
        return ObjectiveEstimate(float(np.sum(vals) / N), float(math.sqrt(np.sum(var)) / N))


def snap_points(support: Support, stats_per_measure, movable=None, masses_per_measure=None) -> Support:
    """Move each movable point to sum_j a_j b_j / sum_j a_j.

    ``b_j`` are the cell centroids in ``stats_per_measure``; the masses
    ``a_j`` come from the same stats unless ``masses_per_measure`` is
    given. Measures whose cell is empty are left out of the average, and a
    point whose cells are all empty stays put. ``movable`` is a set of
    point ids (default: all).
    """
    stats_per_measure = list(stats_per_measure)
    if masses_per_measure is None:
        masses_per_measure = [st.masses for st in stats_per_measure]
    num = np.zeros_like(support.points)
    den = np.zeros(support.m)
    for st, a in zip(stats_per_measure, masses_per_measure):
        a = np.asarray(a, dtype=np.float64)
        ok = st.defined & (a > 0)
        num[ok] += a[ok, None] * st.centroids[ok]
        den[ok] += a[ok]
    if movable is None:
        move = np.ones(support.m, bool)
    else:
        move = np.isin(support.ids, np.fromiter(movable, dtype=np.int64, count=len(movable)))
    move &= den > 0
    pts = support.points.copy()
    pts[move] = num[move] / den[move, None]
    return support.with_points(pts)


def _ascend_all(samplers, support, weights, params: PipelineParams, key):
    """One ascent per measure; tasks share nothing but read-only inputs."""

    def task(j):
        seed = streams.child(params.seed, streams.ASCENT, *key, j)
        try:
            return ascend_weights(samplers[j], support, weights[j], params.ascent, seed, workers=inner)
        except NumericFailureError as exc:
            raise NumericFailureError(f"ascent on measure {j} (round {key[0]}, outer iteration {key[1]}): {exc}", exc.iteration) from exc

    N = len(samplers)
    if params.workers > 1 and N > 1:
        inner = 1
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            reports = list(pool.map(task, range(N)))
    else:
        inner = params.workers
        reports = [task(j) for j in range(N)]
    return reports


def _check_descent(prev: ObjectiveEstimate, cur: ObjectiveEstimate, where):
    tol = 3.0 * math.hypot(prev.stderr, cur.stderr)
    if cur.value > prev.value + tol:
        log.warning("objective rose from %.6g to %.6g at %s (tolerance %.2g)", prev.value, cur.value, where, tol)
        return False
    return True


def _optimize(run: BarycenterRun, movable, T, round_index) -> BarycenterRun:
    params = run.params
    samplers = run.samplers
    N = len(samplers)
    support = run.support
    weights = [WeightVector(w.values if isinstance(w, WeightVector) else w, j) for j, w in enumerate(run.weights)]

    reports = _ascend_all(samplers, support, weights, params, (round_index, 0))
    weights = [r.final_weights for r in reports]
    current = run.evaluate(support, weights)
    if run.initial_objective is None:
        run.initial_objective = current

    tol = params.displacement_tol * max(run.box.diameter, np.finfo(float).tiny)
    for t in range(1, int(T) + 1):
        cen = [
            estimate_cell_stats(samplers[j], support, weights[j], params.ascent.K,
                                streams.generator(params.seed, streams.SNAP, round_index, t, j), params.workers)
            for j in range(N)
        ]
        masses = None if params.fresh_snap_masses else [r.last_stats.masses for r in reports]
        new_support = snap_points(support, cen, movable, masses)
        disp = float(np.max(np.linalg.norm(new_support.points - support.points, axis=1)))
        support = new_support

        reports = _ascend_all(samplers, support, weights, params, (round_index, t))
        weights = [r.final_weights for r in reports]
        est = run.evaluate(support, weights)
        _check_descent(current, est, f"round {round_index}, iteration {t}")
        current = est
        run.history.append(OuterRecord(
            round_index, t, support.m,
            [r.iterations for r in reports],
            [r.final_grad_norm_sq for r in reports],
            [r.converged for r in reports],
            est.value, est.stderr, disp, support.ids.copy(),
        ))
        log.info("round %d iteration %d: m=%d objective %.6g (+-%.2g) displacement %.3g",
                 round_index, t, support.m, est.value, est.stderr, disp)
        if disp < tol:
            break

    run.support = support
    run.weights = weights
    run.reports = reports
    run.rounds = max(run.rounds, round_index)
    return run


def optimize_support(samplers, support, weights=None, params: PipelineParams | None = None, movable=None, *, T=None, box=None) -> BarycenterRun:
    """Run up to ``T`` ascent/snap rounds on a fixed-size support.

    ``weights`` defaults to zeros; ``movable`` (a set of ids) to all points.
    The returned run ends on an ascent, so its weights balance its support.
    """
    params = params or PipelineParams()
    samplers = list(samplers)
    if not samplers:
        raise InvalidInputError("need at least one measure")
    support = support if isinstance(support, Support) else Support(support)
    if weights is None:
        weights = [WeightVector.zeros(support.m, j) for j in range(len(samplers))]
    if len(weights) != len(samplers):
        raise InvalidInputError("need one weight vector per measure")
    box = box or domain_box(samplers, params.padding)
    run = BarycenterRun(samplers, params, box, support, list(weights))
    return _optimize(run, movable, params.T if T is None else T, 0)


def grow_support(run: BarycenterRun, target_m, strategy: GrowthStrategy | None = None, seed=None) -> BarycenterRun:
    """Insert points one at a time until the support has ``target_m`` points.

    Each new point is drawn uniformly from the run's domain box and enters
    every weight vector at 0. With the global strategy all points move
    afterwards; with the local one only the new point does.
    """
    strategy = GrowthStrategy(strategy) if strategy is not None else run.params.strategy
    seed = run.params.seed if seed is None else seed
    if target_m < run.m:
        raise InvalidInputError(f"target size {target_m} is below the current size {run.m}")
    while run.m < target_m:
        r = run.rounds + 1
        x = run.box.sample_uniform(streams.generator(seed, streams.GROW, r))[0]
        run.support = run.support.append(x)
        new_id = int(run.support.ids[-1])
        run.weights = [w.append_zero() for w in run.weights]
        movable = None if strategy is GrowthStrategy.GLOBAL else {new_id}
        _optimize(run, movable, run.params.T, r)
    return run


def initial_support(samplers, m, box: DomainBox, seed, init="uniform") -> Support:
    """Starting support: uniform in the box, or one averaged draw per point.

    ``init="sample"`` averages one independent draw from every measure, which
    for a single measure is plain i.i.d. sampling.
    """
    if init == "uniform":
        return Support(box.sample_uniform(streams.generator(seed, streams.INIT), m))
    draws = [s.draw_batch(streams.generator(seed, streams.INIT, j), m) for j, s in enumerate(samplers)]
    return Support(np.mean(draws, axis=0))


def run_pipeline(samplers, m, params: PipelineParams | None = None) -> BarycenterRun:
    """Initialize, optimize, then grow to ``m`` points if ``initial_m < m``."""
    params = params or PipelineParams()
    samplers = list(samplers)
    if int(m) < 1:
        raise InvalidInputError("m must be at least 1")
    start = int(m) if params.initial_m is None else int(params.initial_m)
    if not 1 <= start <= m:
        raise InvalidInputError("initial_m must lie in [1, m]")
    box = domain_box(samplers, params.padding)
    support = initial_support(samplers, start, box, params.seed, params.init)
    run = optimize_support(samplers, support, params=params, box=box)
    if start < m:
        grow_support(run, m)
    return run


def with_seed(params: PipelineParams, seed) -> PipelineParams:
    return replace(params, seed=int(seed))
