"""
Metered decision oracles.

The attack only ever sees ``phi(x) in {-1, +1}``: +1 when the victim's hard
label is the adversarial one. Every evaluation is charged to a QueryLedger
and fails once the budget is spent.
"""

import threading
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import BudgetExhausted, ConfigError, GradientUnavailable


class QueryLedger:
    """Thread-safe query counter with a hard cap."""

    def __init__(self, budget):
        if budget < 1:
            raise ConfigError(f"budget must be positive, got {budget}")
        self.budget = int(budget)
        self.used = 0
        self.milestones = []
        self._lock = threading.Lock()

    @property
    def remaining(self):
        return self.budget - self.used

    def charge(self):
        with self._lock:
            if self.used >= self.budget:
                raise BudgetExhausted(f"query budget of {self.budget} exhausted")
            self.used += 1
            return self.used

    def mark(self, tag):
        self.milestones.append((self.used, tag))

    def __repr__(self):
        return f"QueryLedger(used={self.used}, budget={self.budget})"


@dataclass(frozen=True)
class OracleSpec:
    """
    A victim model plus the attack goal.

    Targeted mode: verdict +1 iff the label equals ``target_label``.
    Untargeted mode: verdict +1 iff the label differs from ``original_label``.
    """

    model: object
    target_label: Optional[int] = None
    original_label: Optional[int] = None
    untargeted: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        problems = []
        if self.class_count < 2:
            problems.append("class_count must be >= 2")
        if self.untargeted:
            if self.original_label is None:
                problems.append("untargeted mode needs original_label")
        else:
            if self.target_label is None:
                problems.append("targeted mode needs target_label")
            elif self.target_label == self.original_label:
                problems.append("target_label must differ from original_label")
        if problems:
            raise ConfigError(problems)

    @property
    def kind(self):
        return self.model.kind

    @property
    def class_count(self):
        return self.model.class_count

    def verdict(self, label):
        if self.untargeted:
            return 1 if label != self.original_label else -1
        return 1 if label == self.target_label else -1


def untargeted_view(spec, original_label=None):
    """Collapse every class other than ``original_label`` into one adversarial class."""
    if original_label is None:
        original_label = spec.original_label
    if spec.untargeted and spec.original_label == original_label:
        return spec
    return replace(spec, untargeted=True, original_label=original_label, target_label=None)


def phi(spec, ledger, x):
    """One metered hard-label query. Raises BudgetExhausted before charging if spent."""
    if ledger.used >= ledger.budget:
        raise BudgetExhausted(f"query budget of {ledger.budget} exhausted")
    label = spec.model.predict(x)
    ledger.charge()
    return spec.verdict(label)


class MeteredOracle:
    """``phi`` bound to one spec and one ledger; what the attack loop holds."""

    def __init__(self, spec, ledger):
        self.spec = spec
        self.ledger = ledger

    def __call__(self, x):
        return phi(self.spec, self.ledger, x)

    def peek(self, x):
        """Unmetered verdict, for test instrumentation only."""
        return self.spec.verdict(self.spec.model.predict(x))


def true_gradient(spec, x):
    """
    Gradient of an adversarial score for analytic victims.

    linear: ``w`` when the adversarial class is the positive side, else ``-w``.
    sphere: ``x - center`` when the adversarial class is outside the ball, else
    ``center - x`` (both point into the adversarial region).
    """
    model = spec.model
    x = np.asarray(x, dtype=np.float64).ravel()
    if model.kind == "linear":
        sign = spec.verdict(model.positive_label)
        return sign * model.weights.copy()
    if model.kind == "sphere":
        sign = spec.verdict(model.outside_label)
        return sign * (x - model.center)
    raise GradientUnavailable(f"no analytic gradient for {model.kind!r} oracles")
