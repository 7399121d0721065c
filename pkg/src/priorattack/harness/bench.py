"""Estimator-versus-analytic-gradient alignment on linear victims."""

import numpy as np

from ..core import RandomSource, cosine_similarity
from ..gradprior import PriorConfig, Variant, estimate_raw
from ..victims import MeteredOracle, QueryLedger, true_gradient


def linear_boundary_point(model, near):
    """Orthogonal projection of ``near`` onto the hyperplane of a LinearModel."""
    near = np.asarray(near, dtype=np.float64)
    w = model.weights
    x = near.ravel() - model.score(near) * w / (w @ w)
    return x.reshape(near.shape)


def estimator_alignment(spec, x, sample_counts=(10, 100, 1000), seeds=range(50), delta=1e-3):
    """
    Cosine between the raw Monte Carlo estimate at ``x`` and the true score
    gradient, for each seed and sample count. Returns ``{B: array of cosines}``.
    """
    grad = true_gradient(spec, x)
    out = {}
    for B in sample_counts:
        cfg = PriorConfig(B=B, variant=Variant.NONE)
        cosines = []
        for seed in seeds:
            oracle = MeteredOracle(spec, QueryLedger(B))
            raw = estimate_raw(oracle, x, delta, cfg, RandomSource(seed))
            cosines.append(cosine_similarity(raw, grad))
        out[B] = np.array(cosines)
    return out
