"""Stochastic semidiscrete Wasserstein barycenters.

Weights of a power diagram are balanced by momentum ascent on Monte Carlo
gradients; support points then move to the mass-weighted average of their
cell centroids across the input measures.
"""

__version__ = "0.1.0"

from .ascent import AscentParams, AscentReport, ascend_weights
from .barycenter import (
    BarycenterRun,
    GrowthStrategy,
    OuterRecord,
    PipelineParams,
    grow_support,
    optimize_support,
    run_pipeline,
    snap_points,
)
from .domain import CellStats, DomainBox, InvalidInputError, NumericFailureError, Support, WeightVector

__all__ = [
    "AscentParams", "AscentReport", "ascend_weights", "BarycenterRun", "GrowthStrategy", "OuterRecord",
    "PipelineParams", "grow_support", "optimize_support", "run_pipeline", "snap_points", "CellStats",
    "DomainBox", "InvalidInputError", "NumericFailureError", "Support", "WeightVector", "__version__",
]
