"""Command-line front end.

Writes, under ``--out-dir``:

* the final support as CSV (``id,x0,...``), every coordinate with 17
  significant digits;
* one JSON line per outer iteration with ascent effort, gradient norms,
  objective estimate and largest snap displacement;
* a JSON manifest holding the resolved configuration, so any run can be
  repeated;
* optional PNG figures of the support and the trace.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .apps import blue_noise_run, super_sample_run
from .barycenter import run_pipeline
from .config import FORMAT_VERSION, ConfigError, load_config, render_config
from .domain import InvalidInputError, NumericFailureError

log = logging.getLogger("sdbary")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage
        self.code = 3 if isinstance(exc, NumericFailureError) else 2 if isinstance(exc, InvalidInputError) else 1


def format_csv(support) -> str:
    D = support.dim
    lines = ["id," + ",".join(f"x{d}" for d in range(D))]
    for i, p in zip(support.ids, support.points):
        lines.append(f"{int(i)}," + ",".join(f"{float(v):.16e}" for v in p))
    return "\n".join(lines) + "\n"


def format_trace(run) -> str:
    rows = []
    for r in run.history:
        d = r.as_dict()
        rows.append(json.dumps({
            "outer_iter": d["iteration"], "round": d["round"], "m": d["m"],
            "ascent_iters": d["ascent_iterations"], "grad_norm_sq": d["grad_norm_sq"],
            "converged": d["converged"], "objective": d["objective"],
            "objective_stderr": d["objective_stderr"], "max_displacement": d["max_displacement"],
        }))
    return "".join(row + "\n" for row in rows)


def execute(config, workers=None):
    """Run the configured pipeline and return the BarycenterRun."""
    params = config.pipeline_params(workers)
    try:
        samplers = config.samplers()
    except (InvalidInputError, OSError) as exc:
        raise StageError("measure setup", exc) from exc
    try:
        if config.mode == "bluenoise":
            return blue_noise_run(samplers[0], config.m, params)
        if config.mode == "supersample":
            return super_sample_run(samplers[0], config.m, params)
        return run_pipeline(samplers, config.m, params)
    except (InvalidInputError, NumericFailureError) as exc:
        raise StageError("pipeline", exc) from exc


def write_outputs(config, run, out_dir, workers, figures=True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"csv": config.output.csv, "trace": config.output.trace, "manifest": config.output.manifest}
    (out / files["csv"]).write_text(format_csv(run.support), encoding="utf-8")
    (out / files["trace"]).write_text(format_trace(run), encoding="utf-8")
    if figures:
        from .plotting import plot_support, plot_trace

        files["support_figure"] = "support.png"
        files["trace_figure"] = "trace.png"
        plot_support(run, out / files["support_figure"])
        plot_trace(run, out / files["trace_figure"])
    init = run.initial_objective
    manifest = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "config": config.to_dict(),
        "config_toml": render_config(config),
        "workers": int(workers),
        "outputs": files,
        "summary": {
            "m": run.support.m,
            "outer_iterations": len(run.history),
            "initial_objective": None if init is None else init.value,
            "final_objective": run.history[-1].objective if run.history else None,
            "all_ascents_converged": bool(all(r.converged for r in run.reports)),
        },
    }
    (out / files["manifest"]).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return files


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="sdbary", description="Stochastic Wasserstein barycenters, stippling and supersampling.")
    p.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--workers", type=_positive, help="worker threads (results do not depend on this)")
    p.add_argument("--out-dir", type=Path, default=Path("sdbary-out"), help="output directory (default: %(default)s)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"sdbary: configuration failed: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    workers = args.workers if args.workers is not None else config.workers
    try:
        run = execute(config, workers)
    except StageError as exc:
        print(f"sdbary: {exc}", file=sys.stderr)
        return exc.code
    try:
        files = write_outputs(config, run, args.out_dir, workers, figures=config.output.figures and not args.no_figures)
    except OSError as exc:
        print(f"sdbary: writing outputs failed: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s to %s", ", ".join(files.values()), args.out_dir)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
