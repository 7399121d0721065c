import math
from collections import defaultdict

import numpy as np

from ..core import cosine_similarity
from ..errors import UndefinedMetricError


def _groups(rows):
    groups = defaultdict(list)
    for r in rows:
        groups[(r.variant, r.milestone)].append(r)
    return groups


def compute_asr(rows, threshold):
    """
    Fraction of runs whose best-so-far MSE at the milestone is below
    ``threshold``, keyed by ``(variant, milestone)``. Failed runs (NaN MSE)
    count as unsuccessful.
    """
    rows = list(rows)
    if not rows:
        raise UndefinedMetricError("success rate of an empty result set")
    return {
        key: sum(r.mse < threshold for r in group) / len(group)
        for key, group in sorted(_groups(rows).items())
    }


def summarize(rows, threshold):
    """Mean, median and success rate per (variant, milestone); NaN rows are skipped in the averages."""
    asr = compute_asr(rows, threshold)
    out = []
    for (variant, milestone), group in sorted(_groups(rows).items()):
        values = np.array([r.mse for r in group if not math.isnan(r.mse)])
        out.append({
            "variant": variant,
            "milestone": milestone,
            "runs": len(group),
            "mean_mse": float(values.mean()) if values.size else float("nan"),
            "median_mse": float(np.median(values)) if values.size else float("nan"),
            "asr": asr[(variant, milestone)],
        })
    return out


def successive_cosines(gradients):
    """``(t, cos(g_t, g_{t-1}))`` for t >= 2, with iterations numbered from 1."""
    return [
        (t, cosine_similarity(gradients[t - 1], gradients[t - 2]))
        for t in range(2, len(gradients) + 1)
    ]


def cosine_trace_report(trace):
    """Successive-gradient cosines recorded in a run trace; empty below two iterations."""
    if trace.iterations < 2:
        return []
    return [(r.iteration, r.grad_cosine) for r in trace.rows if not math.isnan(r.grad_cosine)]


def phase_means(report, early_end=20, late_start=50):
    """Mean cosine over iterations ``<= early_end`` and ``> late_start``."""
    early = [c for t, c in report if t <= early_end]
    late = [c for t, c in report if t > late_start]
    if not early or not late:
        raise UndefinedMetricError("report does not cover both phases")
    return float(np.mean(early)), float(np.mean(late))
