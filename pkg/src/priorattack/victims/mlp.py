"""
Dense ReLU network forward pass and its JSON weights format.

Layer convention: ``weights`` has shape ``(rows, cols) = (out_dim, in_dim)``
and a layer computes ``act(W @ x + bias)``. Consecutive layers chain when the
``cols`` of layer i+1 equal the ``rows`` of layer i.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError

ACTIVATIONS = {
    "relu": lambda z: np.maximum(z, 0.0),
    "identity": lambda z: z,
}


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        self.bias = np.asarray(self.bias, dtype=np.float64).ravel()
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.bias.size != self.weights.shape[0]:
            raise ShapeError(f"bias length {self.bias.size} != rows {self.weights.shape[0]}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ConfigError("layer contains non-finite values")

    @property
    def rows(self):
        return self.weights.shape[0]

    @property
    def cols(self):
        return self.weights.shape[1]


@dataclass
class MlpWeights:
    input_dim: int
    class_count: int
    layers: list = field(default_factory=list)

    def __post_init__(self):
        problems = []
        if not self.layers:
            problems.append("at least one layer is required")
        if self.class_count < 2:
            problems.append("class_count must be >= 2")
        expected = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.cols != expected:
                problems.append(f"layer {i}: cols {layer.cols} != incoming width {expected}")
            expected = layer.rows
        if self.layers and expected != self.class_count:
            problems.append(f"final layer width {expected} != class_count {self.class_count}")
        if problems:
            raise ConfigError(problems)

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "class_count": self.class_count,
            "layers": [
                {
                    "rows": layer.rows,
                    "cols": layer.cols,
                    "weights": layer.weights.ravel().tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation,
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            layers = []
            for spec in doc["layers"]:
                rows, cols = int(spec["rows"]), int(spec["cols"])
                flat = np.asarray(spec["weights"], dtype=np.float64)
                if flat.size != rows * cols:
                    raise ShapeError(f"weights length {flat.size} != {rows}*{cols}")
                layers.append(
                    Layer(flat.reshape(rows, cols), spec["bias"], spec.get("activation", "relu"))
                )
            return cls(int(doc["input_dim"]), int(doc["class_count"]), layers)
        except KeyError as exc:
            raise ConfigError(f"MLP weights missing field {exc.args[0]!r}") from None


def load_mlp(path):
    with open(path) as fh:
        return MlpWeights.from_dict(json.load(fh))


def save_mlp(weights, path):
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(weights.to_dict(), fh)


def mlp_logits(weights, x):
    h = np.asarray(x, dtype=np.float64).ravel()
    if h.size != weights.input_dim:
        raise ShapeError(f"expected {weights.input_dim} inputs, got {h.size}")
    for layer in weights.layers:
        h = ACTIVATIONS[layer.activation](layer.weights @ h + layer.bias)
    return h


def mlp_predict(weights, x):
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return int(np.argmax(mlp_logits(weights, x)))
