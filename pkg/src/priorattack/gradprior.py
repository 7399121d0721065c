"""
Gradient-direction estimation with a data prior and a time prior.

The raw estimate is the sign-weighted mean of (optionally bilateral-filtered)
unit perturbations around a boundary point. The time prior looks back over the
last ``k`` final estimates, keeps those whose iterate is close (distance below
``tau``) and whose direction agrees with the raw estimate (cosine above
``rho``), and pushes the new direction away from their normalised sum:

    final = 2 * raw / |raw| - unit(sum of admitted finals)

so a direction that has already been exploited is partly reflected out.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .bilateral import BilateralKernel, GuideSelection, filter_perturbations
from .core import clip_unit_box, cosine_similarity, l2_distance, mse, sample_unit_perturbations, unit
from .errors import (
    BudgetExhausted,
    ConfigError,
    DegenerateEstimateError,
    DegeneratePerturbationError,
    PartialEstimateError,
    UndefinedSimilarityError,
)

MAX_FILTER_RETRIES = 5


class Variant(str, Enum):
    FULL = "full"
    NO_DP = "no_dp"
    NO_TP = "no_tp"
    NONE = "none"
    NAIVE_TP = "naive_tp"

    @property
    def uses_filter(self):
        return self in (Variant.FULL, Variant.NO_TP)

    @property
    def uses_gated_prior(self):
        return self in (Variant.FULL, Variant.NO_DP)


DISTANCES = {"mse": mse, "l2": l2_distance}


@dataclass(frozen=True)
class PriorConfig:
    B: int = 100
    k: int = 5
    tau: float = 0.2
    rho: float = 0.1
    distance_metric: str = "mse"
    variant: Variant = Variant.FULL
    baseline_correction: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        problems = []
        if self.B < 1:
            problems.append(f"B must be >= 1, got {self.B}")
        if self.k < 1:
            problems.append(f"k must be >= 1, got {self.k}")
        if not self.tau > 0:
            problems.append(f"tau must be positive, got {self.tau}")
        if not -1 < self.rho < 1:
            problems.append(f"rho must lie in (-1, 1), got {self.rho}")
        if self.distance_metric not in DISTANCES:
            problems.append(f"distance_metric must be one of {sorted(DISTANCES)}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class HistoryEntry:
    index: int
    x: np.ndarray
    gradient: np.ndarray
    delta: float


class GradientHistory:
    """Ring buffer of the last ``capacity`` (iterate, final gradient, delta) triples."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._entries = deque(maxlen=capacity)

    def append(self, index, x, gradient, delta):
        if self._entries and index <= self._entries[-1].index:
            raise ValueError(f"history index {index} not after {self._entries[-1].index}")
        self._entries.append(HistoryEntry(index, np.array(x), np.array(gradient), float(delta)))

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    @property
    def indices(self):
        return [e.index for e in self._entries]

    @property
    def next_index(self):
        return self._entries[-1].index + 1 if self._entries else 1


@dataclass(frozen=True)
class GateRecord:
    index: int
    distance: float
    cosine: float
    admitted: bool


@dataclass
class GradientEstimate:
    direction: np.ndarray
    raw: np.ndarray
    gate_report: List[GateRecord] = field(default_factory=list)
    queries_spent: int = 0

    @property
    def admitted_count(self):
        return sum(r.admitted for r in self.gate_report)


class PerturbationFilter:
    """Bilateral smoothing of sampled perturbations against a chosen guide."""

    def __init__(self, cfg, guide=GuideSelection.TARGET_IMAGE, renormalize=True):
        self.cfg = cfg
        self.guide = GuideSelection(guide)
        self.renormalize = renormalize
        self._cached = None

    def kernel(self, target, current):
        if self.guide is GuideSelection.CURRENT_ADVERSARIAL:
            return BilateralKernel(current, self.cfg)
        # the target image never changes during a run
        if self._cached is None or self._cached[0] is not target:
            self._cached = (target, BilateralKernel(target, self.cfg))
        return self._cached[1]

    def sample(self, rng, count, shape, target, current):
        dim = int(np.prod(shape))
        kernel = self.kernel(target, current)
        u = sample_unit_perturbations(rng, count, dim)
        out, bad = filter_perturbations(u, kernel, shape[2], self.renormalize)
        for b in np.flatnonzero(bad):
            for _ in range(MAX_FILTER_RETRIES):
                row, still_bad = filter_perturbations(
                    sample_unit_perturbations(rng, 1, dim), kernel, shape[2], self.renormalize
                )
                if not still_bad[0]:
                    out[b] = row[0]
                    break
            else:
                raise DegeneratePerturbationError(
                    f"perturbation {b} stayed degenerate after {MAX_FILTER_RETRIES} resamples"
                )
        return out


def estimate_raw(oracle, x_t, delta_t, cfg, rng, filt=None, target=None):
    """
    Monte Carlo estimate ``(1/B) sum_b phi(clip(x_t + delta_t u_b)) u_b``.

    Spends exactly ``cfg.B`` queries or raises PartialEstimateError with the
    number actually spent.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if filt is None:
        u = sample_unit_perturbations(rng, cfg.B, x_t.size)
    else:
        u = filt.sample(rng, cfg.B, x_t.shape, target, x_t)
    signs = np.empty(cfg.B)
    for b in range(cfg.B):
        probe = clip_unit_box(x_t + delta_t * u[b].reshape(x_t.shape))
        try:
            signs[b] = oracle(probe)
        except BudgetExhausted:
            raise PartialEstimateError(b) from None
    if cfg.baseline_correction:
        signs = signs - signs.mean()
    raw = signs @ u / cfg.B
    if not np.any(raw):
        raise DegenerateEstimateError("Monte Carlo estimate is the zero vector")
    return raw


def select_history(history, x_t, raw_t, cfg, t=None, use_cosine=True):
    """Evaluate both gates on every entry in the window ``[max(1, t-k), t-1]``."""
    if t is None:
        t = history.next_index
    distance = DISTANCES[cfg.distance_metric]
    lo = max(1, t - cfg.k)
    admitted, report = [], []
    for entry in history:
        if not lo <= entry.index <= t - 1:
            continue
        d = distance(x_t, entry.x)
        try:
            s = cosine_similarity(raw_t, entry.gradient)
        except UndefinedSimilarityError:
            s = float("nan")
        ok = d < cfg.tau and (not use_cosine or s > cfg.rho)
        report.append(GateRecord(entry.index, d, s, bool(ok)))
        if ok:
            admitted.append(entry)
    return admitted, report


def combine(raw_t, admitted):
    """``2 * unit(raw) - unit(sum of admitted gradients)``; empty or zero sum drops the term."""
    base = 2.0 * unit(raw_t)
    if not admitted:
        return base
    prior = np.sum([e.gradient for e in admitted], axis=0)
    if not np.any(prior):
        return base
    return base - unit(prior)


def naive_combine(raw_t, admitted):
    if not admitted:
        return raw_t.copy()
    return raw_t + np.sum([e.gradient for e in admitted], axis=0) / len(admitted)


def estimate_with_priors(
    oracle, x_t, delta_t, history, cfg, rng, filt=None, target=None, t: Optional[int] = None
):
    """
    One full gradient estimate for iteration ``t``; appends the result to ``history``.

    A degenerate (all-cancelling) raw estimate is retried once with fresh
    perturbations before the error propagates.
    """
    if t is None:
        t = history.next_index
    variant = cfg.variant
    if not variant.uses_filter:
        filt = None
    start = oracle.ledger.used
    try:
        try:
            raw = estimate_raw(oracle, x_t, delta_t, cfg, rng, filt, target)
        except DegenerateEstimateError:
            raw = estimate_raw(oracle, x_t, delta_t, cfg, rng, filt, target)
    except PartialEstimateError:
        raise PartialEstimateError(oracle.ledger.used - start) from None

    report = []
    if variant.uses_gated_prior:
        admitted, report = select_history(history, x_t, raw, cfg, t)
        direction = combine(raw, admitted)
    elif variant is Variant.NAIVE_TP:
        admitted, report = select_history(history, x_t, raw, cfg, t, use_cosine=False)
        direction = naive_combine(raw, admitted)
    else:
        direction = raw.copy()
    history.append(t, x_t, direction, delta_t)
    return GradientEstimate(direction, raw, report, oracle.ledger.used - start)
