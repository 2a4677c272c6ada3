"""Single-measure applications: image stippling and supersampling."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import streams
from .barycenter import BarycenterRun, PipelineParams, grow_support, optimize_support
from .domain import InvalidInputError, Support
from .samplers import ImagePixels, Sampler, domain_box, from_spec


def _start(sampler: Sampler, m, params: PipelineParams, jitter=None) -> Support:
    """Initial support for a single measure.

    ``init="sample"`` uses independent draws; ``jitter`` spreads each draw
    uniformly over a cell of that width so repeated atoms do not coincide.
    """
    box = domain_box([sampler], params.padding)
    if params.init == "uniform":
        return Support(box.sample_uniform(streams.generator(params.seed, streams.INIT), m))
    rng = streams.generator(params.seed, streams.INIT, 0)
    pts = sampler.draw_batch(rng, m)
    if jitter is not None:
        pts = pts + (rng.random(pts.shape) - 0.5) * jitter
    return Support(pts)


def _single(sampler, m, params, jitter=None) -> BarycenterRun:
    if int(m) < 1:
        raise InvalidInputError("m must be at least 1")
    start = int(m) if params.initial_m is None else min(int(params.initial_m), int(m))
    run = optimize_support([sampler], _start(sampler, start, params, jitter), params=params)
    if start < m:
        grow_support(run, int(m))
    return run


def blue_noise_run(image, m, params: PipelineParams | None = None) -> BarycenterRun:
    """Full run record behind :func:`blue_noise`."""
    params = params or PipelineParams(init="sample")
    sampler = image if isinstance(image, ImagePixels) else from_spec(image)
    if not isinstance(sampler, ImagePixels):
        raise InvalidInputError("blue noise needs an image measure")
    return _single(sampler, m, params, jitter=sampler.pixel_pitch)


def blue_noise(image, m, params: PipelineParams | None = None) -> Support:
    """Stipple ``m`` points whose local density follows the image intensity.

    ``image`` is an ImagePixels sampler or its spec. Points start at pixel
    draws spread over their pixel area, then alternate ascent and snap.
    Setting ``params.initial_m`` grows the support one point at a time from
    that size instead.
    """
    return blue_noise_run(image, m, params).support


def super_sample_run(spec, m, params: PipelineParams | None = None) -> BarycenterRun:
    params = params or PipelineParams(init="sample")
    sampler = spec if isinstance(spec, Sampler) else from_spec(spec)
    return _single(sampler, m, params)


def super_sample(spec, m, params: PipelineParams | None = None) -> Support:
    """``m`` evenly spread points approximating the measure ``spec``."""
    return super_sample_run(spec, m, params).support


def with_strategy(params: PipelineParams, strategy) -> PipelineParams:
    return replace(params, strategy=strategy)
