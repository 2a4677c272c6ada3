import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdbary.ascent import AscentParams
from sdbary.barycenter import GrowthStrategy
from sdbary.config import ConfigError, OutputConfig, RunConfig, parse_config, render_config
from sdbary.samplers import write_pgm

MINIMAL = """
m = 10

[[measures]]
type = "uniform_box"
lower = [0.0, 0.0]
upper = [1.0, 1.0]
"""


def test_minimal_defaults():
    c = parse_config(MINIMAL)
    assert c.m == 10 and c.mode == "barycenter" and c.T == 10
    assert (c.ascent.alpha, c.ascent.beta, c.ascent.epsilon, c.K) == (1e-3, 0.99, 1e-6, 65536)
    assert c.K_eval == 100_000 and c.strategy is GrowthStrategy.GLOBAL
    assert c.resolved_init == "uniform"
    p = c.pipeline_params(workers=3)
    assert p.workers == 3 and p.ascent == c.ascent


def test_beta_out_of_range():
    with pytest.raises(ConfigError, match=r"beta must be in \[0,1\)") as err:
        parse_config(MINIMAL + "\n[ascent]\nbeta = 1.2\n")
    assert err.value.key == "ascent.beta"
    assert err.value.line == 10


def test_bluenoise_needs_one_image():
    text = 'mode = "bluenoise"\n' + MINIMAL + '\n[[measures]]\ntype = "dirac"\npoint = [0.0, 0.0]\n'
    with pytest.raises(ConfigError, match="bluenoise"):
        parse_config(text)
    with pytest.raises(ConfigError, match="image"):
        parse_config('mode = "bluenoise"\n' + MINIMAL)


def test_unknown_key_named_with_line():
    with pytest.raises(ConfigError) as err:
        parse_config("m = 3\nstepsize = 2\n" + MINIMAL.replace("m = 10", ""))
    assert err.value.key == "stepsize" and err.value.line == 2


def test_malformed_text():
    with pytest.raises(ConfigError, match="line"):
        parse_config("m = 3\nthis is not toml\n")


@pytest.mark.parametrize(
    "extra, key",
    [("seed = -1", "seed"), ("T = 0", "T"), ("K = 1", "K"), ('strategy = "sideways"', "strategy"),
     ("initial_m = 11", "initial_m"), ('mode = "paint"', "mode")],
)
def test_constraint_violations(extra, key):
    with pytest.raises(ConfigError) as err:
        parse_config(extra + "\n" + MINIMAL)
    assert err.value.key == key


def test_missing_measures_and_m():
    with pytest.raises(ConfigError, match="measures"):
        parse_config("m = 3\n")
    with pytest.raises(ConfigError, match="'m'"):
        parse_config(MINIMAL.replace("m = 10", ""))


def test_image_path_must_exist(tmp_path):
    text = 'mode = "bluenoise"\nm = 4\n[[measures]]\ntype = "image"\npath = "pic.pgm"\n'
    with pytest.raises(ConfigError, match="measures"):
        parse_config(text, base_dir=tmp_path)
    write_pgm(tmp_path / "pic.pgm", np.full((4, 4), 200, dtype=np.uint8))
    assert parse_config(text, base_dir=tmp_path).resolved_init == "sample"


finite = st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 6))


@st.composite
def configs(draw):
    lo = [draw(finite), draw(finite)]
    hi = [v + draw(st.floats(0.1, 10)) for v in lo]
    measures = [{"type": "uniform_box", "lower": lo, "upper": hi}]
    if draw(st.booleans()):
        measures.append({"type": "dirac", "point": [draw(finite), draw(finite)]})
    if draw(st.booleans()):
        measures.append({"type": "gaussian_mixture", "weights": [1.0], "means": [[draw(finite), 0.0]],
                         "covariances": [[[1.0, 0.0], [0.0, 2.0]]]})
    m = draw(st.integers(1, 10_000))
    return RunConfig(
        measures=tuple(measures),
        m=m,
        mode="barycenter",
        strategy=draw(st.sampled_from(list(GrowthStrategy))),
        T=draw(st.integers(1, 50)),
        ascent=AscentParams(alpha=draw(st.floats(1e-6, 1.0)), beta=draw(st.floats(0, 0.999)),
                            epsilon=draw(st.floats(1e-12, 1e-2)), max_iters=draw(st.integers(1, 10**6)),
                            K=draw(st.integers(2, 10**6)), smoothing=draw(st.floats(0, 0.999))),
        K_eval=draw(st.integers(2, 10**7)),
        seed=draw(st.integers(0, 2**64 - 1)),
        padding=draw(st.floats(0, 5)),
        initial_m=draw(st.none() | st.integers(1, m)),
        init=draw(st.sampled_from([None, "uniform", "sample"])),
        fresh_snap_masses=draw(st.booleans()),
        workers=draw(st.integers(1, 64)),
        output=OutputConfig(csv=draw(st.sampled_from(["a.csv", "points.csv"])), figures=draw(st.booleans())),
    )


@given(configs())
def test_render_parse_round_trip(config):
    assert parse_config(render_config(config)) == config
