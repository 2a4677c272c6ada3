"""Sample access to the input measures.

Every sampler turns rows of i.i.d. uniforms into points. A batch of K draws
consumes exactly the uniforms that K calls to ``draw`` would, so
``draw_batch(rng, K)`` equals ``[draw(rng) for _ in range(K)]`` bit for bit.
Rejection samplers keep that property by returning the first K accepted
rows of the uniform row stream.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .domain import DomainBox, InvalidInputError, as_point

# Offset that maps random() output k * 2**-53 into the open interval (0, 1).
_HALF_ULP = 2.0**-54


class Sampler:
    """Base class: a stateless description of one input measure."""

    kind = "abstract"
    row_width = 0  # uniforms consumed per trial

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _transform(self, u):
        """Map uniform rows (n, row_width) to (points, accepted mask)."""
        raise NotImplementedError

    def draw(self, rng) -> np.ndarray:
        return self.draw_batch(rng, 1)[0]

    def draw_batch(self, rng, K) -> np.ndarray:
        K = int(K)
        if K < 1:
            raise InvalidInputError(f"batch size must be at least 1, got {K}")
        pts, ok = self._transform(rng.random((K, self.row_width)))
        if ok.all():
            return pts
        out = np.empty((K, self.dim))
        pts = pts[ok]
        out[: pts.shape[0]] = pts
        filled = pts.shape[0]
        while filled < K:
            need = K - filled
            pts, ok = self._transform(rng.random((need, self.row_width)))
            pts = pts[ok]
            out[filled : filled + pts.shape[0]] = pts
            filled += pts.shape[0]
        return out

    def support_box(self) -> DomainBox:
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()})"


class UniformBox(Sampler):
    kind = "uniform_box"

    def __init__(self, lower, upper):
        self.lower = as_point(lower)
        self.upper = as_point(upper)
        if self.lower.shape != self.upper.shape or np.any(self.lower >= self.upper):
            raise InvalidInputError("uniform_box needs lower < upper on every axis")
        self.row_width = self.lower.size

    @property
    def dim(self):
        return self.lower.size

    @property
    def density(self) -> float:
        return 1.0 / float(np.prod(self.upper - self.lower))

    def _transform(self, u):
        u *= self.upper - self.lower
        u += self.lower
        return u, np.ones(len(u), bool)

    def support_box(self):
        return DomainBox(self.lower, self.upper)

    def to_spec(self):
        return {"type": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Segment(Sampler):
    kind = "segment"
    row_width = 1

    def __init__(self, a, b):
        self.a = as_point(a)
        self.b = as_point(b)
        if self.a.shape != self.b.shape:
            raise InvalidInputError("segment endpoints differ in dimension")

    @property
    def dim(self):
        return self.a.size

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def _transform(self, u):
        return self.a + u[:, :1] * (self.b - self.a), np.ones(len(u), bool)

    def support_box(self):
        return DomainBox(np.minimum(self.a, self.b), np.maximum(self.a, self.b))

    def to_spec(self):
        return {"type": self.kind, "a": self.a.tolist(), "b": self.b.tolist()}


class Ellipse(Sampler):
    """Uniform in arc length on an ellipse curve in the plane.

    The angle parameter is proposed uniformly and accepted with probability
    speed(t) / max speed, which yields arc-length uniform points.
    """

    kind = "ellipse"
    row_width = 2

    def __init__(self, center, semi_major, semi_minor, skew_angle=0.0):
        self.center = as_point(center)
        if self.center.size != 2:
            raise InvalidInputError("ellipse is only defined in two dimensions")
        self.semi_major = float(semi_major)
        self.semi_minor = float(semi_minor)
        self.skew_angle = float(skew_angle)
        if not (self.semi_major > 0 and self.semi_minor > 0):
            raise InvalidInputError("ellipse axes must be positive")
        c, s = math.cos(self.skew_angle), math.sin(self.skew_angle)
        self._rot = np.array([[c, -s], [s, c]])
        self._vmax = max(self.semi_major, self.semi_minor)

    @property
    def dim(self):
        return 2

    def _transform(self, u):
        a, b = self.semi_major, self.semi_minor
        t = 2.0 * math.pi * u[:, 0]
        speed = np.sqrt((a * np.sin(t)) ** 2 + (b * np.cos(t)) ** 2)
        ok = u[:, 1] * self._vmax <= speed
        lx, ly = a * np.cos(t), b * np.sin(t)
        # elementwise rather than a matrix product, so rows round the same in any batch size
        R = self._rot
        pts = np.column_stack([self.center[0] + (R[0, 0] * lx + R[0, 1] * ly), self.center[1] + (R[1, 0] * lx + R[1, 1] * ly)])
        return pts, ok

    def support_box(self):
        a, b, th = self.semi_major, self.semi_minor, self.skew_angle
        hx = math.sqrt((a * math.cos(th)) ** 2 + (b * math.sin(th)) ** 2)
        hy = math.sqrt((a * math.sin(th)) ** 2 + (b * math.cos(th)) ** 2)
        half = np.array([hx, hy])
        return DomainBox(self.center - half, self.center + half)

    def to_spec(self):
        return {
            "type": self.kind,
            "center": self.center.tolist(),
            "semi_major": self.semi_major,
            "semi_minor": self.semi_minor,
            "skew_angle": self.skew_angle,
        }


class GaussianMixture(Sampler):
    """Gaussian mixture truncated (by redraw) to its 4-sigma bounding box."""

    kind = "gaussian_mixture"
    truncation_sigmas = 4.0

    def __init__(self, weights, means, covariances):
        self.weights = np.asarray(weights, dtype=np.float64).ravel()
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        covs = np.asarray(covariances, dtype=np.float64)
        if covs.ndim == 2:
            covs = covs[None]
        self.covariances = covs
        n, D = self.means.shape
        if self.weights.size != n or covs.shape != (n, D, D):
            raise InvalidInputError("mixture weights, means and covariances disagree in shape")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("mixture weights must be positive and sum to 1")
        if not np.all(np.isfinite(self.means)):
            raise InvalidInputError("mixture means must be finite")
        chols = []
        for c in covs:
            if not np.allclose(c, c.T, rtol=0, atol=1e-12):
                raise InvalidInputError("covariances must be symmetric")
            try:
                chols.append(np.linalg.cholesky(c))
            except np.linalg.LinAlgError:
                raise InvalidInputError("covariances must be positive definite") from None
        self._chol = np.array(chols)
        self._cdf = np.cumsum(self.weights)
        self._cdf[-1] = 1.0
        self.row_width = 1 + D
        self._box = self._sigma_box()

    @property
    def dim(self):
        return self.means.shape[1]

    def _sigma_box(self):
        sd = np.sqrt(np.einsum("kii->ki", self.covariances))
        k = self.truncation_sigmas
        return DomainBox((self.means - k * sd).min(0), (self.means + k * sd).max(0))

    def _transform(self, u):
        comp = np.minimum(np.searchsorted(self._cdf, u[:, 0], side="right"), self.weights.size - 1)
        z = ndtri(u[:, 1:] + _HALF_ULP)
        L = self._chol[comp]
        acc = L[:, :, 0] * z[:, :1]
        for j in range(1, z.shape[1]):
            acc = acc + L[:, :, j] * z[:, j : j + 1]
        pts = self.means[comp] + acc
        return pts, self._box.contains(pts)

    def support_box(self):
        return self._box

    def to_spec(self):
        return {
            "type": self.kind,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }


class _Atoms(Sampler):
    """Shared machinery for finitely supported measures."""

    row_width = 1

    def _set_atoms(self, atoms, probs):
        self.atoms = np.asarray(atoms, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        self.probs = probs / probs.sum()
        self._cdf = np.cumsum(self.probs)
        self._cdf[-1] = 1.0

    @property
    def dim(self):
        return self.atoms.shape[1]

    def _transform(self, u):
        idx = np.minimum(np.searchsorted(self._cdf, u[:, 0], side="right"), self.atoms.shape[0] - 1)
        return self.atoms[idx], np.ones(len(u), bool)

    def support_box(self):
        return DomainBox(self.atoms.min(0), self.atoms.max(0))


class Empirical(_Atoms):
    """Uniform measure over a fixed list of points (repeats allowed)."""

    kind = "empirical"

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] < 1 or not np.all(np.isfinite(pts)):
            raise InvalidInputError("empirical measure needs at least one finite point")
        self._set_atoms(pts, np.ones(pts.shape[0]))

    def _transform(self, u):
        n = self.atoms.shape[0]
        idx = np.minimum((u[:, 0] * n).astype(np.int64), n - 1)
        return self.atoms[idx], np.ones(len(u), bool)

    def to_spec(self):
        return {"type": self.kind, "points": self.atoms.tolist()}


class ImagePixels(_Atoms):
    """Discrete measure on pixel centers with mass proportional to intensity.

    ``intensities`` is indexed [row, col] in file order (row 0 on top).
    Pixel (r, c) sits at ((c + 0.5) * pitch, (H - r - 0.5) * pitch), so the
    y axis points up as in a standard plot.
    """

    kind = "image"

    def __init__(self, intensities, pixel_pitch=1.0, path=None):
        img = np.asarray(intensities, dtype=np.float64)
        if img.ndim != 2 or img.size == 0:
            raise InvalidInputError("image must be a non-empty 2-d grid")
        if np.any(img < 0) or not np.all(np.isfinite(img)):
            raise InvalidInputError("image intensities must be finite and non-negative")
        if img.sum() <= 0:
            raise InvalidInputError("image has zero total intensity")
        self.pixel_pitch = float(pixel_pitch)
        if not self.pixel_pitch > 0:
            raise InvalidInputError("pixel pitch must be positive")
        self.intensities = img
        self.path = path
        rows, cols = np.nonzero(img)
        self._set_atoms(self.pixel_centers(rows, cols), img[rows, cols])

    @classmethod
    def from_pgm(cls, path, pixel_pitch=1.0):
        return cls(read_pgm(path), pixel_pitch, path=str(path))

    @property
    def shape(self):
        return self.intensities.shape

    def pixel_centers(self, rows, cols):
        H = self.intensities.shape[0]
        p = self.pixel_pitch
        return np.column_stack([(np.asarray(cols) + 0.5) * p, (H - np.asarray(rows) - 0.5) * p])

    def extent(self) -> DomainBox:
        """The full image rectangle, including fully dark margins."""
        H, W = self.intensities.shape
        return DomainBox([0.0, 0.0], [W * self.pixel_pitch, H * self.pixel_pitch])

    def to_spec(self):
        spec = {"type": self.kind, "pixel_pitch": self.pixel_pitch}
        if self.path is not None:
            spec["path"] = self.path
        else:
            spec["intensities"] = self.intensities.tolist()
        return spec


class Dirac(Sampler):
    kind = "dirac"
    row_width = 0

    def __init__(self, point):
        self.point = as_point(point)

    @property
    def dim(self):
        return self.point.size

    def draw_batch(self, rng, K):
        K = int(K)
        if K < 1:
            raise InvalidInputError(f"batch size must be at least 1, got {K}")
        return np.tile(self.point, (K, 1))

    def support_box(self):
        return DomainBox(self.point, self.point)

    def to_spec(self):
        return {"type": self.kind, "point": self.point.tolist()}


def domain_box(samplers, padding=0.0) -> DomainBox:
    """Smallest axis-aligned box holding every sampler's support, padded."""
    samplers = list(samplers)
    if not samplers:
        raise InvalidInputError("need at least one sampler")
    if len({s.dim for s in samplers}) != 1:
        raise InvalidInputError("all measures must share one dimension")
    box = samplers[0].support_box()
    for s in samplers[1:]:
        box = box.union(s.support_box())
    return box.padded(float(padding))


def draw(sampler, rng):
    return sampler.draw(rng)


def draw_batch(sampler, K, rng):
    return sampler.draw_batch(rng, K)


_SPEC_KEYS = {
    "uniform_box": ({"lower", "upper"}, set()),
    "segment": ({"a", "b"}, set()),
    "ellipse": ({"center", "semi_major", "semi_minor"}, {"skew_angle"}),
    "gaussian_mixture": ({"weights", "means", "covariances"}, set()),
    "image": (set(), {"path", "intensities", "pixel_pitch"}),
    "empirical": ({"points"}, set()),
    "dirac": ({"point"}, set()),
}


def check_spec(spec):
    """Validate the keys of a sampler description; returns the kind."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidInputError("measure needs a 'type' key")
    kind = spec["type"]
    if kind not in _SPEC_KEYS:
        raise InvalidInputError(f"unknown measure type {kind!r}; expected one of {sorted(_SPEC_KEYS)}")
    required, optional = _SPEC_KEYS[kind]
    keys = set(spec) - {"type"}
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise InvalidInputError(f"{kind} measure is missing {sorted(missing)}")
    if unknown:
        raise InvalidInputError(f"{kind} measure has unknown keys {sorted(unknown)}")
    if kind == "image" and ("path" in spec) == ("intensities" in spec):
        raise InvalidInputError("image measure needs exactly one of 'path' or 'intensities'")
    return kind


def from_spec(spec, base_dir=None) -> Sampler:
    """Build a sampler from its dictionary description."""
    kind = check_spec(spec)
    if kind == "uniform_box":
        return UniformBox(spec["lower"], spec["upper"])
    if kind == "segment":
        return Segment(spec["a"], spec["b"])
    if kind == "ellipse":
        return Ellipse(spec["center"], spec["semi_major"], spec["semi_minor"], spec.get("skew_angle", 0.0))
    if kind == "gaussian_mixture":
        return GaussianMixture(spec["weights"], spec["means"], spec["covariances"])
    if kind == "empirical":
        return Empirical(spec["points"])
    if kind == "dirac":
        return Dirac(spec["point"])
    pitch = spec.get("pixel_pitch", 1.0)
    if "intensities" in spec:
        return ImagePixels(spec["intensities"], pitch)
    path = Path(spec["path"])
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    img = ImagePixels(read_pgm(path), pitch, path=spec["path"])
    return img


def _pgm_tokens(data):
    """Yield whitespace-separated header tokens, skipping comments, with end offsets."""
    i, n = 0, len(data)
    while i < n:
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P2 ascii or P5 binary) as a (H, W) array."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        w, _ = next(tokens)
        h, _ = next(tokens)
        maxval, end = next(tokens)
        W, H, maxval = int(w), int(h), int(maxval)
    except (StopIteration, ValueError):
        raise InvalidInputError(f"{path}: malformed PGM header") from None
    if magic not in (b"P2", b"P5"):
        raise InvalidInputError(f"{path}: not a PGM file (magic {magic!r})")
    if not 0 < maxval < 256:
        raise InvalidInputError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    if magic == b"P5":
        raw = data[end + 1 : end + 1 + W * H]
        if len(raw) != W * H:
            raise InvalidInputError(f"{path}: truncated pixel data")
        img = np.frombuffer(raw, dtype=np.uint8).reshape(H, W)
    else:
        vals = [int(t) for t, _ in tokens]
        if len(vals) < W * H:
            raise InvalidInputError(f"{path}: truncated pixel data")
        img = np.array(vals[: W * H], dtype=np.int64).reshape(H, W)
    return img.astype(np.int64)


def write_pgm(path, image, binary=True):
    """Write an 8-bit grayscale PGM; ``image`` is indexed [row, col]."""
    img = np.clip(np.rint(np.asarray(image)), 0, 255).astype(np.uint8)
    H, W = img.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{W} {H}\n255\n".encode())
            fh.write(img.tobytes())
        else:
            fh.write(f"P2\n{W} {H}\n255\n".encode())
            for row in img:
                fh.write((" ".join(str(v) for v in row) + "\n").encode())
