"""
Label-only classifiers used as attack victims.

Every model maps an image array shaped ``(H, W, C)`` to an integer class id
via ``predict``. Only the analytic models (linear, sphere) know their score
gradient; that is exposed for tests, never to the attack.
"""

import numpy as np

from ..errors import ShapeError


class LinearModel:
    """
    Two-class affine classifier.

    Predicts ``positive_label`` when ``w . x + b > 0`` and ``negative_label``
    otherwise, so the decision boundary is the hyperplane ``w . x + b = 0``.
    """

    kind = "linear"

    def __init__(self, weights, bias=0.0, positive_label=1, negative_label=0):
        self.weights = np.asarray(weights, dtype=np.float64).ravel()
        self.bias = float(bias)
        if positive_label == negative_label:
            raise ValueError("positive and negative labels must differ")
        self.positive_label = int(positive_label)
        self.negative_label = int(negative_label)
        self.class_count = max(self.positive_label, self.negative_label) + 1

    def score(self, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size != self.weights.size:
            raise ShapeError(f"expected {self.weights.size} inputs, got {x.size}")
        return float(self.weights @ x) + self.bias

    def predict(self, x):
        return self.positive_label if self.score(x) > 0 else self.negative_label

    def boundary_crossing(self, start, end):
        """Blend coefficient a where ``(1 - a) * start + a * end`` hits the boundary."""
        s0, s1 = self.score(start), self.score(end)
        return s0 / (s0 - s1)

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "positive_label": self.positive_label,
            "negative_label": self.negative_label,
        }


class SphereModel:
    """
    Predicts ``inside_label`` strictly inside the ball ``|x - center| < radius``
    and ``outside_label`` elsewhere.
    """

    kind = "sphere"

    def __init__(self, center, radius, inside_label=0, outside_label=1):
        self.center = np.asarray(center, dtype=np.float64).ravel()
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.inside_label = int(inside_label)
        self.outside_label = int(outside_label)
        self.class_count = max(self.inside_label, self.outside_label) + 1

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size != self.center.size:
            raise ShapeError(f"expected {self.center.size} inputs, got {x.size}")
        diff = x - self.center
        return self.inside_label if float(diff @ diff) < self.radius**2 else self.outside_label

    def to_dict(self):
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "radius": self.radius,
            "inside_label": self.inside_label,
            "outside_label": self.outside_label,
        }


class MlpModel:
    kind = "mlp"

    def __init__(self, weights):
        self.weights = weights
        self.class_count = weights.class_count

    def predict(self, x):
        from .mlp import mlp_predict

        return mlp_predict(self.weights, x)

    def to_dict(self):
        return {"kind": self.kind, **self.weights.to_dict()}


def model_from_dict(doc, base_dir=None):
    """
    Rebuild a model from its ``to_dict`` form.

    An MLP may instead name a weights file via ``"path"``, resolved against
    ``base_dir``.
    """
    from pathlib import Path

    from ..errors import ConfigError
    from .mlp import MlpWeights, load_mlp

    kind = doc.get("kind")
    try:
        if kind == "linear":
            return LinearModel(
                doc["weights"], doc.get("bias", 0.0),
                doc.get("positive_label", 1), doc.get("negative_label", 0),
            )
        if kind == "sphere":
            return SphereModel(
                doc["center"], doc["radius"],
                doc.get("inside_label", 0), doc.get("outside_label", 1),
            )
        if kind == "mlp":
            if "path" in doc:
                return MlpModel(load_mlp(Path(base_dir or ".") / doc["path"]))
            return MlpModel(MlpWeights.from_dict(doc))
    except KeyError as exc:
        raise ConfigError(f"{kind} model missing field {exc.args[0]!r}") from None
    raise ConfigError(f"unknown model kind {kind!r}")
