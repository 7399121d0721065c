"""
Decision-based black-box attack with a boundary-walk gradient estimator,
edge-aware (joint bilateral) perturbation sampling and a gated gradient
history.
"""

from .attack import AttackConfig, AttackResult, RunTrace, TraceRow, run_attack
from .bilateral import FilterConfig, GuideSelection, joint_bilateral_filter
from .core import Image, RandomSource
from .gradprior import GradientHistory, PriorConfig, Variant, estimate_with_priors

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "FilterConfig",
    "GradientHistory",
    "GuideSelection",
    "Image",
    "PriorConfig",
    "RandomSource",
    "RunTrace",
    "TraceRow",
    "Variant",
    "estimate_with_priors",
    "joint_bilateral_filter",
    "run_attack",
]
