"""
Boundary-walking attack loop.

Each iteration estimates the score-gradient direction at the current boundary
point, steps along it (halving the step until the label stays adversarial),
then bisects back toward the target image along the straight blend
``alpha * target + (1 - alpha) * stepped``. The step size is
``|x_t - target| / sqrt(t)`` and the probe radius ``|x_t - target| / dim``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Union

import numpy as np

from .bilateral import FilterConfig, GuideSelection
from .core import RandomSource, clip_unit_box, cosine_similarity, l2_distance, mse, unit
from .errors import (
    BudgetExhausted,
    ConfigError,
    DegenerateEstimateError,
    DegeneratePerturbationError,
    InitializationFailed,
    InvalidStartError,
    PartialEstimateError,
)
from .gradprior import GradientHistory, PerturbationFilter, PriorConfig, estimate_with_priors
from .victims.oracle import MeteredOracle, OracleSpec, QueryLedger

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    prior: PriorConfig = field(default_factory=PriorConfig)
    filter: Optional[FilterConfig] = None
    guide: GuideSelection = GuideSelection.TARGET_IMAGE
    renormalize_filtered: bool = True
    budget: int = 5000
    search_tol: Union[float, str] = 1e-3
    max_step_attempts: int = 10
    init_attempts: int = 100
    seed: int = 0
    max_iterations: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "guide", GuideSelection(self.guide))
        problems = []
        if self.budget < 1:
            problems.append("budget must be positive")
        if self.search_tol != "hsja" and not 0 < self.search_tol < 1:
            problems.append("search_tol must lie in (0, 1) or be 'hsja'")
        if self.max_step_attempts < 1:
            problems.append("max_step_attempts must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            problems.append("max_iterations must be >= 1")
        if self.prior.variant.uses_filter and self.filter is None:
            problems.append(f"variant {self.prior.variant.value!r} needs a filter config")
        if problems:
            raise ConfigError(problems)


def hsja_tolerance(dim):
    """Bisection threshold ``dim ** -1.5`` used by the reference HopSkipJump code."""
    return dim ** -1.5


def resolve_tolerance(tol, dim):
    return hsja_tolerance(dim) if tol == "hsja" else float(tol)


def step_size(distance, t):
    return distance / math.sqrt(t)


def probe_radius(distance, dim):
    return distance / dim


class BoundaryResult(NamedTuple):
    x: np.ndarray
    alpha: float
    partial: bool


class StepResult(NamedTuple):
    x: np.ndarray
    xi: float
    stalled: bool
    partial: bool


@dataclass
class TraceRow:
    queries: int
    iteration: int
    mse: float
    best_mse: float
    xi: float
    delta: float
    grad_norm: float
    grad_cosine: float
    admitted: int
    stalled: bool

    FIELDS = (
        "queries", "iteration", "mse", "best_mse", "xi", "delta",
        "grad_norm", "grad_cosine", "admitted", "stalled",
    )


@dataclass
class RunTrace:
    initial_queries: int = 0
    initial_mse: float = float("nan")
    rows: List[TraceRow] = field(default_factory=list)
    status: str = "ok"

    @property
    def total_queries(self):
        return self.rows[-1].queries if self.rows else self.initial_queries

    @property
    def iterations(self):
        return sum(1 for r in self.rows if not math.isnan(r.grad_norm))

    def best_mse_at(self, queries):
        """Best-so-far MSE after at most ``queries`` oracle calls."""
        best = self.initial_mse
        for row in self.rows:
            if row.queries > queries:
                break
            best = row.best_mse
        return best


@dataclass
class AttackState:
    target: np.ndarray
    current: np.ndarray
    best: np.ndarray
    best_mse: float
    t: int
    history: GradientHistory
    ledger: QueryLedger
    trace: RunTrace


@dataclass
class AttackResult:
    best: np.ndarray
    trace: RunTrace
    state: AttackState

    def __iter__(self):
        return iter((self.best, self.trace))


def project_to_boundary(oracle, target, x_tilde, tol=1e-3):
    """
    Bisect ``alpha`` in ``alpha * target + (1 - alpha) * x_tilde``.

    ``x_tilde`` must already be adversarial. The low end always stays
    adversarial; bisection stops once the bracket width is at most ``tol``.
    """
    low, high = 0.0, 1.0
    best = x_tilde
    while high - low > tol:
        mid = (low + high) / 2.0
        blend = mid * target + (1.0 - mid) * x_tilde
        try:
            verdict = oracle(blend)
        except BudgetExhausted:
            return BoundaryResult(best, low, True)
        if verdict == 1:
            low, best = mid, blend
        else:
            high = mid
    return BoundaryResult(best, low, False)


def gradient_step(oracle, x_t, direction, xi, max_attempts=10):
    """
    Move ``xi`` along ``direction``, halving ``xi`` until the result stays adversarial.

    After ``max_attempts`` rejected candidates ``x_t`` is returned as stalled.
    """
    step = unit(direction).reshape(np.shape(x_t))
    for _ in range(max_attempts):
        candidate = clip_unit_box(x_t + xi * step)
        try:
            verdict = oracle(candidate)
        except BudgetExhausted:
            return StepResult(x_t, xi, True, True)
        if verdict == 1:
            return StepResult(candidate, xi, False, False)
        xi /= 2.0
    return StepResult(x_t, xi, True, False)


def initialize(oracle, target, x_init=None, rng=None, tol=1e-3, attempts=100, history_size=5):
    """Verify or find a starting adversarial image and pull it onto the boundary."""
    target = np.asarray(target, dtype=np.float64)
    try:
        if x_init is not None:
            x_init = clip_unit_box(np.asarray(x_init, dtype=np.float64).reshape(target.shape))
            if oracle(x_init) != 1:
                raise InvalidStartError("initial image is not adversarial")
        elif oracle.spec.untargeted:
            rng = rng or RandomSource(0)
            for _ in range(attempts):
                candidate = rng.uniform(target.shape)
                if oracle(candidate) == 1:
                    x_init = candidate
                    break
            else:
                raise InitializationFailed(f"no adversarial random image in {attempts} draws")
        else:
            raise InvalidStartError("targeted attacks need an initial image of the target class")
        proj = project_to_boundary(oracle, target, x_init, tol)
    except BudgetExhausted as exc:
        raise InitializationFailed(f"budget exhausted during initialization: {exc}") from None

    start = proj.x
    start_mse = mse(start, target)
    trace = RunTrace(initial_queries=oracle.ledger.used, initial_mse=start_mse)
    oracle.ledger.mark("initialized")
    return AttackState(
        target=target,
        current=start,
        best=start,
        best_mse=start_mse,
        t=1,
        history=GradientHistory(history_size),
        ledger=oracle.ledger,
        trace=trace,
    )


def run_attack(oracle, target, x_init=None, config=None):
    """
    Run until the query budget (or ``config.max_iterations``) is spent;
    returns the best adversarial found.

    ``oracle`` is either an OracleSpec (a fresh ledger with ``config.budget``
    is created) or an already metered oracle.
    """
    config = config or AttackConfig()
    if isinstance(oracle, OracleSpec):
        oracle = MeteredOracle(oracle, QueryLedger(config.budget))
    rng = RandomSource(config.seed)
    prior = config.prior
    filt = None
    if prior.variant.uses_filter:
        filt = PerturbationFilter(config.filter, config.guide, config.renormalize_filtered)

    tol = resolve_tolerance(config.search_tol, np.size(target))
    state = initialize(oracle, target, x_init, rng, tol, config.init_attempts, prior.k)
    target = state.target
    dim = target.size
    trace = state.trace
    prev_direction = None

    def record(xi, delta, estimate, stalled):
        cur_mse = mse(state.current, target)
        if cur_mse < state.best_mse:
            state.best, state.best_mse = state.current, cur_mse
        grad_norm = grad_cos = float("nan")
        admitted = 0
        if estimate is not None:
            grad_norm = float(np.linalg.norm(estimate.direction))
            admitted = estimate.admitted_count
            if prev_direction is not None:
                grad_cos = cosine_similarity(estimate.direction, prev_direction)
        trace.rows.append(
            TraceRow(oracle.ledger.used, state.t, cur_mse, state.best_mse,
                     xi, delta, grad_norm, grad_cos, admitted, stalled)
        )

    while True:
        distance = l2_distance(state.current, target)
        if distance == 0.0:
            break
        xi = step_size(distance, state.t)
        delta = probe_radius(distance, dim)
        try:
            estimate = estimate_with_priors(
                oracle, state.current, delta, state.history, prior, rng, filt, target, state.t
            )
        except PartialEstimateError:
            if oracle.ledger.used > trace.total_queries:
                record(xi, delta, None, True)
            break
        except (DegenerateEstimateError, DegeneratePerturbationError) as exc:
            log.debug("iteration %d: %s", state.t, exc)
            record(xi, delta, None, True)
            if state.t == config.max_iterations:
                break
            state.t += 1
            continue

        step = gradient_step(oracle, state.current, estimate.direction, xi, config.max_step_attempts)
        partial = step.partial
        if not step.stalled:
            proj = project_to_boundary(oracle, target, step.x, tol)
            state.current = proj.x
            partial = proj.partial
        record(xi, delta, estimate, step.stalled)
        prev_direction = estimate.direction
        if partial or oracle.ledger.remaining == 0 or state.t == config.max_iterations:
            break
        state.t += 1

    oracle.ledger.mark("finished")
    return AttackResult(state.best, trace, state)
