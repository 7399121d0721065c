"""
Images, distances and seeded randomness used by every other module.

Images are numpy float64 arrays shaped ``(height, width, channels)``; their
C-order ravel is the flat, row-major, channel-interleaved vector all the
attack arithmetic works on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, ShapeError, UndefinedSimilarityError

PRNG_ALGORITHM = "PCG64"


@dataclass(frozen=True)
class Image:
    """Shape-carrying wrapper around a flat pixel vector in [0, 1]."""

    height: int
    width: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ShapeError(f"image size must be positive, got {self.height}x{self.width}")
        if self.channels not in (1, 3):
            raise ShapeError(f"channels must be 1 or 3, got {self.channels}")
        data = np.ascontiguousarray(self.data, dtype=np.float64).ravel()
        if data.size != self.height * self.width * self.channels:
            raise ShapeError(
                f"data length {data.size} != {self.height}*{self.width}*{self.channels}"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array):
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, None]
        if array.ndim != 3:
            raise ShapeError(f"expected a (H, W[, C]) array, got shape {array.shape}")
        h, w, c = array.shape
        return cls(h, w, c, array.ravel())

    @property
    def shape(self):
        return (self.height, self.width, self.channels)

    @property
    def dim(self):
        return self.data.size

    def to_array(self):
        return self.data.reshape(self.shape).copy()


class RandomSource:
    """
    Single-owner PCG64 stream.

    Parallel consumers must not share one instance; ``split(i)`` derives an
    independent stream seeded with ``seed + i``.
    """

    algorithm = PRNG_ALGORITHM

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def split(self, index):
        return RandomSource((self.seed + int(index)) % 2**64)

    def normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self, size):
        return self.generator.random(size)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, algorithm={self.algorithm!r})"


def sample_unit_perturbations(rng, count, dim):
    """Return ``count`` rows drawn uniformly from the unit sphere in R^dim."""
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    u = rng.normal((count, dim))
    norms = np.sqrt(np.einsum("ij,ij->i", u, u))
    return u / norms[:, None]


def sample_unit_perturbation(rng, dim):
    return sample_unit_perturbations(rng, 1, dim)[0]


def _pair(a, b):
    a = np.asarray(a.data if isinstance(a, Image) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Image) else b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def l2_distance(a, b):
    a, b = _pair(a, b)
    diff = (a - b).ravel()
    return float(np.sqrt(diff @ diff))


def mse(a, b):
    a, b = _pair(a, b)
    diff = (a - b).ravel()
    return float(diff @ diff) / diff.size


def cosine_similarity(g1, g2):
    g1, g2 = _pair(g1, g2)
    g1, g2 = g1.ravel(), g2.ravel()
    n1 = np.sqrt(g1 @ g1)
    n2 = np.sqrt(g2 @ g2)
    if n1 == 0 or n2 == 0:
        raise UndefinedSimilarityError("cosine similarity of a zero vector")
    # normalise first so the result is exactly invariant to positive scaling
    cos = float((g1 / n1) @ (g2 / n2))
    return min(1.0, max(-1.0, cos))


def clip_unit_box(x):
    if isinstance(x, Image):
        return Image(x.height, x.width, x.channels, np.clip(x.data, 0.0, 1.0))
    return np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)


def unit(v):
    """Scale ``v`` to unit Euclidean norm (caller guarantees v != 0)."""
    return v / np.sqrt(np.ravel(v) @ np.ravel(v))
