"""Run configuration: a TOML file with a fixed set of keys.

Example::

    mode = "barycenter"
    m = 100
    seed = 7

    [ascent]
    alpha = 1e-3

    [[measures]]
    type = "uniform_box"
    lower = [0.0, 0.0]
    upper = [1.0, 1.0]

Unknown keys are errors. Validation messages name the offending key and,
when it can be located, its line.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .ascent import AscentParams
from .barycenter import GrowthStrategy, PipelineParams
from .domain import InvalidInputError
from .samplers import check_spec, from_spec

FORMAT_VERSION = 1
MODES = ("barycenter", "bluenoise", "supersample")

_TOP = {"mode", "m", "seed", "strategy", "T", "K", "K_eval", "padding", "initial_m", "init",
        "fresh_snap_masses", "workers", "ascent", "output", "measures"}
_ASCENT = {"alpha", "beta", "epsilon", "max_iters", "smoothing"}
_OUTPUT = {"csv", "trace", "manifest", "figures"}


class ConfigError(InvalidInputError):
    """Invalid configuration; ``key`` and ``line`` locate the problem."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where = f"key '{key}'"
            if line is not None:
                where += f" (line {line})"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class OutputConfig:
    csv: str = "support.csv"
    trace: str = "trace.jsonl"
    manifest: str = "manifest.json"
    figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    measures: tuple
    m: int
    mode: str = "barycenter"
    strategy: GrowthStrategy = GrowthStrategy.GLOBAL
    T: int = 10
    ascent: AscentParams = field(default_factory=AscentParams)
    K_eval: int = 100_000
    seed: int = 0
    padding: float = 0.0
    initial_m: int | None = None
    init: str | None = None
    fresh_snap_masses: bool = False
    workers: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str | None = field(default=None, compare=False)

    @property
    def K(self):
        return self.ascent.K

    @property
    def resolved_init(self):
        if self.init is not None:
            return self.init
        return "uniform" if self.mode == "barycenter" else "sample"

    def samplers(self):
        return [from_spec(dict(s), self.base_dir) for s in self.measures]

    def pipeline_params(self, workers=None) -> PipelineParams:
        return PipelineParams(
            ascent=self.ascent, T=self.T, strategy=self.strategy, initial_m=self.initial_m,
            init=self.resolved_init, K_eval=self.K_eval, padding=self.padding, seed=self.seed,
            workers=self.workers if workers is None else int(workers),
            fresh_snap_masses=self.fresh_snap_masses,
        )

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "m": self.m, "seed": self.seed, "strategy": self.strategy.value, "T": self.T,
             "K": self.ascent.K, "K_eval": self.K_eval, "padding": self.padding}
        if self.initial_m is not None:
            d["initial_m"] = self.initial_m
        if self.init is not None:
            d["init"] = self.init
        d["fresh_snap_masses"] = self.fresh_snap_masses
        d["workers"] = self.workers
        d["ascent"] = {k: getattr(self.ascent, k) for k in ("alpha", "beta", "epsilon", "max_iters", "smoothing")}
        d["output"] = {f.name: getattr(self.output, f.name) for f in fields(OutputConfig)}
        d["measures"] = [dict(s) for s in self.measures]
        return d


def _locate(text, table, key):
    """Line number of ``key`` inside ``table`` (None for top level), if found."""
    current = None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("["):
            current = s.strip("[] ")
            continue
        if current == table and pat.match(line):
            return n
    return None


def _int(value, key, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{key} must be an integer")
    if lo is not None and value < lo:
        raise ValueError(f"{key} must be at least {lo}")
    if hi is not None and value > hi:
        raise ValueError(f"{key} must be at most {hi}")
    return value


def _float(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{key} must be a finite number")
    return float(value)


def build_config(data: dict, base_dir=None, text="") -> RunConfig:
    """Validate a parsed mapping into a RunConfig."""

    def fail(msg, key, table=None):
        raise ConfigError(msg, key if table is None else f"{table}.{key}", _locate(text, table, key))

    for key in data:
        if key not in _TOP:
            fail("unknown key", key)
    for name, allowed in (("ascent", _ASCENT), ("output", _OUTPUT)):
        sub = data.get(name, {})
        if not isinstance(sub, dict):
            fail("must be a table", name)
        for key in sub:
            if key not in allowed:
                fail("unknown key", key, name)

    def get(key, conv, default, table=None):
        src = data if table is None else data.get(table, {})
        if key not in src:
            return default
        try:
            return conv(src[key])
        except (ValueError, TypeError, InvalidInputError) as exc:
            fail(str(exc), key, table)

    mode = get("mode", str, "barycenter")
    if mode not in MODES:
        fail(f"mode must be one of {', '.join(MODES)}", "mode")
    if "m" not in data:
        raise ConfigError("required key is missing", "m")
    m = get("m", lambda v: _int(v, "m", 1), None)
    seed = get("seed", lambda v: _int(v, "seed", 0, 2**64 - 1), 0)
    strategy = get("strategy", lambda v: GrowthStrategy(str(v).lower()), GrowthStrategy.GLOBAL)
    T = get("T", lambda v: _int(v, "T", 1), 10)
    K = get("K", lambda v: _int(v, "K", 2), 65536)
    K_eval = get("K_eval", lambda v: _int(v, "K_eval", 2), 100_000)
    padding = get("padding", lambda v: _float(v, "padding"), 0.0)
    if padding < 0:
        fail("padding must be non-negative", "padding")
    initial_m = get("initial_m", lambda v: _int(v, "initial_m", 1, m), None)
    init = get("init", str, None)
    if init is not None and init not in ("uniform", "sample"):
        fail("init must be 'uniform' or 'sample'", "init")
    fresh = get("fresh_snap_masses", lambda v: v if isinstance(v, bool) else _bad("must be true or false"), False)
    workers = get("workers", lambda v: _int(v, "workers", 1), 1)

    akw = {}
    for key, conv in (("alpha", _float), ("beta", _float), ("epsilon", _float), ("max_iters", _int), ("smoothing", _float)):
        if key in data.get("ascent", {}):
            akw[key] = get(key, lambda v, c=conv, k=key: c(v, k), None, "ascent")
    try:
        ascent = AscentParams(K=K, **akw)
    except InvalidInputError as exc:
        bad = next((k for k in akw if k in str(exc)), "K")
        fail(str(exc), bad, "ascent" if bad != "K" else None)

    okw = {}
    for key in ("csv", "trace", "manifest"):
        if key in data.get("output", {}):
            okw[key] = get(key, lambda v, k=key: v if isinstance(v, str) and v else _bad(f"{k} must be a file name"), None, "output")
    if "figures" in data.get("output", {}):
        okw["figures"] = get("figures", lambda v: v if isinstance(v, bool) else _bad("must be true or false"), True, "output")
    output = OutputConfig(**okw)

    measures = data.get("measures")
    if not isinstance(measures, list) or not measures:
        raise ConfigError("at least one [[measures]] entry is required", "measures", _locate(text, None, "measures"))
    specs = []
    for i, spec in enumerate(measures):
        if not isinstance(spec, dict):
            raise ConfigError("each measure must be a table", f"measures[{i}]")
        try:
            check_spec(spec)
            sampler = from_spec(dict(spec), base_dir)
        except (InvalidInputError, OSError) as exc:
            raise ConfigError(str(exc), f"measures[{i}]", _measure_line(text, i)) from None
        specs.append(spec)
        if i == 0:
            dim = sampler.dim
        elif sampler.dim != dim:
            raise ConfigError("all measures must share one dimension", f"measures[{i}]", _measure_line(text, i))
    if mode == "bluenoise" and (len(specs) != 1 or specs[0]["type"] != "image"):
        fail("bluenoise needs exactly one image measure", "mode")
    if mode == "supersample" and len(specs) != 1:
        fail("supersample needs exactly one measure", "mode")

    return RunConfig(
        measures=tuple(specs), m=m, mode=mode, strategy=strategy, T=T, ascent=ascent, K_eval=K_eval,
        seed=seed, padding=padding, initial_m=initial_m, init=init, fresh_snap_masses=fresh,
        workers=workers, output=output, base_dir=None if base_dir is None else str(base_dir),
    )


def _bad(msg):
    raise ValueError(msg)


def _measure_line(text, i):
    n_seen = -1
    for n, line in enumerate(text.splitlines(), 1):
        if line.strip().startswith("[[measures]]"):
            n_seen += 1
            if n_seen == i:
                return n
    return None


def parse_config(text, base_dir=None) -> RunConfig:
    """Parse and validate configuration text.

    ``base_dir`` resolves relative image paths and enables the check that
    they exist.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed configuration: {exc}", None, int(m.group(1)) if m else None) from None
    return build_config(data, base_dir, text)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def render_config(config: RunConfig) -> str:
    """TOML text that parses back to an equal RunConfig."""
    return tomli_w.dumps(config.to_dict())
