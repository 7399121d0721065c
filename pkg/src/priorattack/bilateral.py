"""
Joint bilateral filtering of perturbations.

The filter is linear in the filtered signal once the guide is fixed, so the
per-pixel weights are computed once per (guide, config) and then applied to
whole batches of perturbations. Windows are clamped to the image: neighbours
outside the frame get zero weight and the normalisation absorbs the loss.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, DegeneratePerturbationError, ShapeError

# above this many stored weights the kernel is recomputed on every apply
_CACHE_LIMIT = 20_000_000


class GuideSelection(str, Enum):
    TARGET_IMAGE = "target_image"
    CURRENT_ADVERSARIAL = "current_adversarial"


@dataclass(frozen=True)
class FilterConfig:
    sigma_s: float
    sigma_r: float
    radius: Optional[int] = None

    def __post_init__(self):
        problems = []
        if not self.sigma_s > 0:
            problems.append(f"sigma_s must be positive, got {self.sigma_s}")
        if not self.sigma_r > 0:
            problems.append(f"sigma_r must be positive, got {self.sigma_r}")
        if self.radius is not None and self.radius < 1:
            problems.append(f"radius must be >= 1, got {self.radius}")
        if problems:
            raise ConfigError(problems)
        if self.radius is None:
            object.__setattr__(self, "radius", max(1, math.ceil(2 * self.sigma_s)))


def _as_hwc(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ShapeError(f"expected (H, W[, C]) array, got shape {x.shape}")
    return x


class BilateralKernel:
    """Joint bilateral weights for one guide image, reusable across inputs."""

    def __init__(self, guide, cfg):
        guide = _as_hwc(guide)
        if guide.shape[2] not in (1, 3):
            raise ShapeError(f"guide must have 1 or 3 channels, got {guide.shape[2]}")
        self.guide = guide
        self.cfg = cfg
        self.height, self.width = guide.shape[:2]
        r = cfg.radius
        self.offsets = []
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                gs = math.exp(-(di * di + dj * dj) / (2.0 * cfg.sigma_s**2))
                if (di, dj) != (0, 0) and gs > 0.0:
                    self.offsets.append((di, dj, gs))
        self._padded_guide = np.pad(guide, ((r, r), (r, r), (0, 0)))
        self._valid = np.pad(np.ones((self.height, self.width)), r)
        self._weights = None
        if len(self.offsets) * self.height * self.width <= _CACHE_LIMIT:
            self._weights = [self._offset_weight(di, dj, gs) for di, dj, gs in self.offsets]
        # centre pixel: g_s = g_r = 1
        self.normalizer = sum(self._iter_weights(), np.ones((self.height, self.width)))

    def _window(self, padded, di, dj):
        r = self.cfg.radius
        return padded[r + di : r + di + self.height, r + dj : r + dj + self.width]

    def _offset_weight(self, di, dj, gs):
        diff = self._window(self._padded_guide, di, dj) - self.guide
        dist2 = np.einsum("ijc,ijc->ij", diff, diff)
        return gs * np.exp(-dist2 / (2.0 * self.cfg.sigma_r**2)) * self._window(self._valid, di, dj)

    def _iter_weights(self):
        if self._weights is not None:
            yield from self._weights
        else:
            for di, dj, gs in self.offsets:
                yield self._offset_weight(di, dj, gs)

    def apply(self, a):
        """
        Filter ``a`` shaped ``(..., H, W, C)``; every channel shares the weights.

        Computed as ``a + sum_k w_k (a_k - a) / sum_k w_k`` which equals the
        normalised weighted mean but leaves constant inputs bit-exact.
        """
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-3:-1] != (self.height, self.width):
            raise ShapeError(
                f"input spatial shape {a.shape[-3:-1]} != guide {(self.height, self.width)}"
            )
        r = self.cfg.radius
        pad = [(0, 0)] * (a.ndim - 3) + [(r, r), (r, r), (0, 0)]
        padded = np.pad(a, pad)
        acc = np.zeros_like(a)
        for (di, dj, _), w in zip(self.offsets, self._iter_weights()):
            shifted = padded[..., r + di : r + di + self.height, r + dj : r + dj + self.width, :]
            acc += w[:, :, None] * (shifted - a)
        return a + acc / self.normalizer[:, :, None]


def joint_bilateral_filter(a, guide, cfg):
    squeeze = np.ndim(a) == 2
    out = BilateralKernel(guide, cfg).apply(_as_hwc(a))
    return out[:, :, 0] if squeeze else out


def filter_perturbations(u, kernel, channels, renormalize=True):
    """
    Filter a batch of flat perturbations ``u`` shaped ``(n, dim)``.

    Returns ``(filtered, degenerate)`` where ``degenerate`` marks rows whose
    filtered output is identically zero (left unnormalised).
    """
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    shape = (u.shape[0], kernel.height, kernel.width, channels)
    if u.shape[1] != kernel.height * kernel.width * channels:
        raise ShapeError(f"perturbation length {u.shape[1]} does not fit {shape[1:]}")
    out = kernel.apply(u.reshape(shape)).reshape(u.shape[0], -1)
    norms = np.sqrt(np.einsum("ij,ij->i", out, out))
    degenerate = norms == 0
    if renormalize:
        safe = np.where(degenerate, 1.0, norms)
        out = out / safe[:, None]
    return out, degenerate


def filter_perturbation(u, guide, cfg, renormalize=True, channels=None):
    guide = _as_hwc(guide)
    if channels is None:
        channels = guide.shape[2]
    out, degenerate = filter_perturbations(u, BilateralKernel(guide, cfg), channels, renormalize)
    if renormalize and degenerate[0]:
        raise DegeneratePerturbationError("filtered perturbation is identically zero")
    return out[0]
