from .config import ExperimentConfig, load_config, resolve_victim
from .experiment import ExperimentResult, run_experiment
from .fixtures import FIXTURES, get_fixture
from .metrics import compute_asr, cosine_trace_report, phase_means, summarize

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "FIXTURES",
    "compute_asr",
    "cosine_trace_report",
    "get_fixture",
    "load_config",
    "phase_means",
    "resolve_victim",
    "run_experiment",
    "summarize",
]
