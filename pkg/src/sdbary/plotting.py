"""Static figures for a finished run (Agg canvas, no display needed)."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from . import streams
from .samplers import ImagePixels


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, metadata={"Software": None})


def plot_support(run, path, background=4000):
    """Support points over faint samples of each input measure."""
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    pts = run.support.points
    for j, s in enumerate(run.samplers):
        if isinstance(s, ImagePixels):
            box = s.extent()
            ax.imshow(s.intensities, cmap="gray", extent=(box.lower[0], box.upper[0], box.lower[1], box.upper[1]),
                      origin="upper", alpha=0.35)
            continue
        y = s.draw_batch(streams.generator(run.params.seed, streams.MISC, j), background)
        if y.shape[1] == 1:
            y = np.column_stack([y[:, 0], np.zeros(len(y))])
        ax.scatter(y[:, 0], y[:, 1], s=1, alpha=0.15, color=f"C{j % 10}", linewidths=0)
    if pts.shape[1] == 1:
        pts = np.column_stack([pts[:, 0], np.zeros(len(pts))])
    size = max(1.0, 2000.0 / max(len(pts), 1) ** 0.8)
    ax.scatter(pts[:, 0], pts[:, 1], s=size, color="k", linewidths=0)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(f"support, m = {run.support.m}")
    _save(fig, path)


def plot_trace(run, path):
    """Objective estimate and ascent effort per outer iteration."""
    fig = Figure(figsize=(8, 4))
    ax1, ax2 = fig.subplots(1, 2)
    est = run.objectives()
    if est:
        v = np.array([e.value for e in est])
        se = np.array([e.stderr for e in est])
        x = np.arange(len(v))
        ax1.errorbar(x, v, yerr=3 * se, fmt="o-", ms=3, capsize=2)
    ax1.set_xlabel("step (0 = before first snap)")
    ax1.set_ylabel("objective estimate")
    iters = np.array([r.ascent_iterations for r in run.history], dtype=float)
    if iters.size:
        for j in range(iters.shape[1]):
            ax2.plot(np.arange(1, len(iters) + 1), iters[:, j], ".-", label=f"measure {j}")
        if iters.shape[1] <= 10:
            ax2.legend(fontsize="small")
    ax2.set_xlabel("outer iteration")
    ax2.set_ylabel("ascent iterations")
    fig.tight_layout()
    _save(fig, path)
