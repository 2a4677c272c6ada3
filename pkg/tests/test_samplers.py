import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdbary import streams
from sdbary.domain import InvalidInputError
from sdbary.samplers import (
    Dirac,
    Ellipse,
    Empirical,
    GaussianMixture,
    ImagePixels,
    Segment,
    UniformBox,
    domain_box,
    draw,
    draw_batch,
    from_spec,
    read_pgm,
    write_pgm,
)

ALL = [
    UniformBox([0, 0], [1, 2]),
    Segment([0, 0], [2, 1]),
    Ellipse([1, 1], 2.0, 0.5, 0.3),
    GaussianMixture([0.3, 0.7], [[0, 0], [3, 1]], [np.eye(2), [[0.5, 0.1], [0.1, 0.2]]]),
    ImagePixels([[0, 1, 2], [3, 0, 1]], 0.5),
    Empirical([[0, 0], [1, 0], [0.5, 2]]),
    Dirac([1.0, -1.0]),
]


def test_dirac_draws():
    s = Dirac([0, 0])
    assert draw(s, np.random.default_rng(0)).tolist() == [0, 0]
    assert draw_batch(Dirac([1, 1]), 3, np.random.default_rng(0)).tolist() == [[1, 1]] * 3


def test_uniform_mean():
    y = draw_batch(UniformBox([0, 0], [1, 1]), 100_000, streams.generator(1))
    np.testing.assert_allclose(y.mean(0), [0.5, 0.5], atol=0.01)


def test_gaussian_mean():
    s = GaussianMixture([1.0], [[2, 3]], [np.eye(2)])
    y = draw_batch(s, 100_000, streams.generator(2))
    np.testing.assert_allclose(y.mean(0), [2, 3], atol=0.02)


def test_empirical_frequencies():
    y = draw_batch(Empirical([[0, 0], [1, 0]]), 100_000, streams.generator(3))
    assert abs((y[:, 0] == 0).mean() - 0.5) <= 0.005


@pytest.mark.parametrize("sampler", ALL, ids=lambda s: s.kind)
def test_batch_equals_loop(sampler):
    batch = sampler.draw_batch(streams.generator(7), 100)
    rng = streams.generator(7)
    loop = np.array([sampler.draw(rng) for _ in range(100)])
    assert np.array_equal(batch, loop)


@pytest.mark.parametrize("sampler", ALL, ids=lambda s: s.kind)
def test_reproducible(sampler):
    a = sampler.draw_batch(streams.generator(11, 2, 3), 500)
    b = sampler.draw_batch(streams.generator(11, 2, 3), 500)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("sampler", ALL, ids=lambda s: s.kind)
def test_draws_inside_domain_box(sampler):
    box = domain_box([sampler], 0.0)
    y = sampler.draw_batch(streams.generator(5), 20_000)
    assert box.contains(y, tol=1e-12).all()


def test_zero_batch_rejected():
    with pytest.raises(InvalidInputError):
        draw_batch(UniformBox([0], [1]), 0, streams.generator(0))


def test_domain_box_examples():
    b = domain_box([UniformBox([0, 0], [1, 1]), UniformBox([2, 0], [3, 1])], 0)
    assert b.lower.tolist() == [0, 0] and b.upper.tolist() == [3, 1]
    b = domain_box([Dirac([5, 5])], 1)
    assert b.lower.tolist() == [4, 4] and b.upper.tolist() == [6, 6]
    b = domain_box([Segment([0, 0], [2, 2])], 0.5)
    assert b.lower.tolist() == [-0.5, -0.5] and b.upper.tolist() == [2.5, 2.5]


def test_domain_box_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        domain_box([Dirac([0, 0]), Dirac([0, 0, 0])])


def test_image_pixel_frequencies():
    img = np.array([[1.0, 3.0], [0.0, 4.0]])
    s = ImagePixels(img, 1.0)
    K = 200_000
    y = s.draw_batch(streams.generator(9), K)
    # pixel (row 0, col 1) sits at (1.5, 1.5) with the y axis flipped
    for (r, c), mass in np.ndenumerate(img):
        q = mass / img.sum()
        centre = s.pixel_centers([r], [c])[0]
        freq = np.all(y == centre, axis=1).mean()
        assert abs(freq - q) <= 3 * np.sqrt(q * (1 - q) / K) + 1e-12
    assert s.pixel_centers([0], [1]).tolist() == [[1.5, 1.5]]


def test_image_validation():
    with pytest.raises(InvalidInputError):
        ImagePixels(np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        ImagePixels([[1, -1]])


def test_mixture_validation():
    with pytest.raises(InvalidInputError):
        GaussianMixture([0.5, 0.4], [[0, 0], [1, 1]], [np.eye(2), np.eye(2)])
    with pytest.raises(InvalidInputError):
        GaussianMixture([1.0], [[0, 0]], [[[1, 2], [2, 1]]])
    with pytest.raises(InvalidInputError):
        GaussianMixture([1.0], [[0, 0]], [[[1, 0.1], [0.2, 1]]])


def test_ellipse_is_uniform_in_arc_length():
    # a thin ellipse: equal arc-length pieces must receive equal mass
    s = Ellipse([0, 0], 3.0, 0.5, 0.0)
    y = s.draw_batch(streams.generator(4), 200_000)
    t = np.linspace(0, 2 * np.pi, 200_001)
    pts = np.column_stack([3 * np.cos(t), 0.5 * np.sin(t)])
    arc = np.concatenate([[0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    theta = np.mod(np.arctan2(y[:, 1] / 0.5, y[:, 0] / 3.0), 2 * np.pi)
    frac = np.interp(theta, t, arc) / arc[-1]
    counts, _ = np.histogram(frac, bins=10, range=(0, 1))
    expected = len(y) / 10
    assert np.all(np.abs(counts - expected) <= 4 * np.sqrt(expected))
    np.testing.assert_allclose((y[:, 0] / 3) ** 2 + (y[:, 1] / 0.5) ** 2, 1.0, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_segment_on_line(seed):
    s = Segment([0, 1], [2, 2])
    y = s.draw_batch(streams.generator(seed), 50)
    np.testing.assert_allclose(y[:, 1], 1 + y[:, 0] / 2, atol=1e-12)


@pytest.mark.parametrize("sampler", [s for s in ALL if not isinstance(s, ImagePixels)], ids=lambda s: s.kind)
def test_spec_round_trip(sampler):
    again = from_spec(sampler.to_spec())
    assert np.array_equal(again.draw_batch(streams.generator(1), 50), sampler.draw_batch(streams.generator(1), 50))


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    img = np.array([[0, 10, 255], [7, 8, 9]], dtype=np.uint8)
    path = tmp_path / "img.pgm"
    write_pgm(path, img, binary=binary)
    assert np.array_equal(read_pgm(path), img)
    s = from_spec({"type": "image", "path": "img.pgm", "pixel_pitch": 2.0}, base_dir=tmp_path)
    assert s.shape == (2, 3)


def test_pgm_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# made by hand\n2 1\n# max\n255\n3 4\n")
    assert read_pgm(path).tolist() == [[3, 4]]


def test_unknown_spec():
    with pytest.raises(InvalidInputError):
        from_spec({"type": "banana"})
    with pytest.raises(InvalidInputError):
        from_spec({"type": "dirac", "point": [0], "extra": 1})
