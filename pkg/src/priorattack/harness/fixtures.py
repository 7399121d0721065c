"""
Built-in desk-scale victims with known geometry.

``linear20`` / ``linear100``: two-class affine victims on small grayscale
images whose weight vector is piecewise constant over the target's two
regions (plus a little noise), so the decision boundary has a closed form.

``sphere20``: ball-shaped boundary near the target, for curvature.

``mlp8``: an 8x8 RGB image and a two-layer ReLU network whose first-layer
features are spatially smooth inside each region of the target and
independent across the region boundary.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..bilateral import BilateralKernel, FilterConfig
from ..gradprior import PriorConfig
from ..victims import Layer, LinearModel, MlpModel, MlpWeights, OracleSpec, SphereModel, mlp_predict
from .bench import linear_boundary_point


@dataclass
class Fixture:
    name: str
    spec: OracleSpec
    target: np.ndarray
    x_init: Optional[np.ndarray]
    filter: FilterConfig
    prior: PriorConfig = field(default_factory=PriorConfig)
    optimum_distance: Optional[float] = None


def _two_region_target(height, width, split):
    target = np.full((height, width, 1), 0.3)
    target[:, split:] = 0.7
    return target


def linear_fixture(height=4, width=5, seed=0, distance=0.5):
    rng = np.random.default_rng(seed)
    target = _two_region_target(height, width, (width * 3) // 5)
    region = np.where(target.ravel() > 0.5, 1.0, -1.0)
    w = region + 0.15 * rng.normal(size=region.size)
    norm = np.linalg.norm(w)
    # target sits `distance` (l2) inside the negative half-space
    b = -(w @ target.ravel()) - distance * norm
    model = LinearModel(w, b)
    # contrast-boosted target plus noise: adversarial, and off the target's normal
    while True:
        x_init = np.clip(np.where(region > 0, 0.95, 0.05) + 0.25 * rng.normal(size=region.size), 0, 1)
        if model.score(x_init) > distance * norm:
            break
    x_init = x_init.reshape(target.shape)
    spec = OracleSpec(model, target_label=1, original_label=0)
    return Fixture(
        f"linear{target.size}",
        spec,
        target,
        x_init,
        FilterConfig(2.0, 8 / 255),
        optimum_distance=abs(model.score(target)) / norm,
    )


def boundary_point(fixture):
    """Orthogonal projection of the target onto a linear fixture's boundary."""
    return linear_boundary_point(fixture.spec.model, fixture.target)


def sphere_fixture(height=4, width=5, radius=0.4, offset=0.25, seed=0):
    """
    Target sits ``offset`` from the centre of a ball of ``radius``; leaving the
    ball is adversarial, so the nearest adversarial point is ``radius - offset`` away.
    """
    rng = np.random.default_rng(seed)
    target = _two_region_target(height, width, (width * 3) // 5)
    direction = rng.normal(size=target.size)
    direction /= np.linalg.norm(direction)
    center = target.ravel() + offset * direction
    model = SphereModel(center, radius, inside_label=0, outside_label=1)
    x_init = np.where(target > 0.5, 0.1, 0.9)
    spec = OracleSpec(model, target_label=1, original_label=0)
    return Fixture(
        f"sphere{target.size}", spec, target, x_init, FilterConfig(2.0, 8 / 255),
        optimum_distance=radius - offset,
    )


def _smooth_field(rng, size, sigma):
    blur = BilateralKernel(np.zeros((size, size, 1)), FilterConfig(sigma, 1e6))
    return blur.apply(rng.normal(size=(size, size, 1)))[:, :, 0]


def mlp_fixture(seed=0, hidden=16, classes=4, smoothness=1.5):
    """
    8x8x3 victim. ``seed`` is advanced until target and start image fall in
    different classes; the first such draw is the fixture.
    """
    size, channels = 8, 3
    cols = np.arange(size)
    target = np.empty((size, size, channels))
    target[:] = (0.25 + 0.05 * cols / (size - 1))[None, :, None]
    target[2:6, 2:6] = 0.75
    target[2:6, 2:6, 1] = 0.5
    x_init = np.full((size, size, channels), 0.85)
    x_init[:, 3:5] = 0.1
    x_init[5:, :] = 0.4
    inside = (target[:, :, 0] > 0.5)[:, :, None]

    while True:
        rng = np.random.default_rng(seed)

        def field():
            return np.stack([_smooth_field(rng, size, smoothness) for _ in range(channels)], -1)

        w1 = np.stack([np.where(inside, field(), field()).ravel() for _ in range(hidden)])
        w1 /= np.linalg.norm(w1, axis=1, keepdims=True)
        w2 = rng.normal(size=(classes, hidden))
        weights = MlpWeights(
            target.size,
            classes,
            [Layer(w1, np.zeros(hidden), "relu"), Layer(w2, np.zeros(classes), "identity")],
        )
        y_target, y_init = mlp_predict(weights, target), mlp_predict(weights, x_init)
        if y_target != y_init:
            break
        seed += 1

    spec = OracleSpec(MlpModel(weights), target_label=y_init, original_label=y_target)
    # B and sigma_s keep the 28x28 defaults' ratios to image size / dimension
    return Fixture(
        "mlp8",
        spec,
        target,
        x_init,
        FilterConfig(0.6, 8 / 255),
        PriorConfig(B=25),
    )


FIXTURES = {
    "linear20": lambda: linear_fixture(4, 5),
    "linear100": lambda: linear_fixture(10, 10),
    "sphere20": sphere_fixture,
    "mlp8": mlp_fixture,
}


def get_fixture(name):
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
