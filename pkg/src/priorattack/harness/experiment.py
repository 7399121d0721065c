"""
Runs the (pair x seed x variant) grid and writes results, a summary and one
trace per run.

Every run owns its oracle ledger, RNG and history, so runs can go to a
process pool; results are gathered in plan order so the output files depend
only on the config.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from ..attack import AttackConfig, RunTrace, run_attack
from ..errors import AttackError, InitializationFailed, InvalidStartError, OracleError
from ..victims import MeteredOracle, QueryLedger
from .config import prior_config, resolve_victim
from .metrics import summarize
from .resultio import ResultRow, trace_path, write_results, write_summary, write_trace

log = logging.getLogger(__name__)

OK = "ok"
ORACLE_FAILED = "oracle_failed"
INIT_FAILED = "init_failed"
FAILED = "failed"

EXIT_CODES = {OK: 0, FAILED: 1, ORACLE_FAILED: 2, INIT_FAILED: 3}


@dataclass(frozen=True)
class RunPlan:
    run_id: str
    pair: int
    seed: int
    variant: str


@dataclass
class RunOutcome:
    plan: RunPlan
    trace: RunTrace
    ledger_used: int
    status: str = OK
    error: Optional[str] = None


@dataclass
class ExperimentResult:
    rows: List[ResultRow]
    outcomes: List[RunOutcome]
    summary: list = field(default_factory=list)

    @property
    def exit_code(self):
        return max((EXIT_CODES[o.status] for o in self.outcomes), default=0)


def plan_runs(config, pair_count):
    plans = []
    for p in range(pair_count):
        for seed in config.seeds:
            for variant in config.variants:
                prefix = f"p{p}-" if pair_count > 1 else ""
                plans.append(RunPlan(f"{prefix}{variant}-s{seed}", p, seed, variant))
    return plans


def attack_config(config, victim, plan):
    return AttackConfig(
        prior=prior_config(config, plan.variant, victim.B),
        filter=victim.filter,
        guide=config.guide_mode,
        renormalize_filtered=config.renormalize,
        budget=config.budget,
        search_tol=config.search_tol,
        max_step_attempts=config.max_step_attempts,
        init_attempts=config.init_attempts,
        seed=plan.seed,
        max_iterations=config.max_iterations,
    )


def execute_run(config, plan, victim=None):
    """One attack; failures are captured in the outcome instead of raised."""
    victim = victim or resolve_victim(config)
    target, x_init = victim.pairs[plan.pair]
    oracle = MeteredOracle(victim.spec, QueryLedger(config.budget))
    try:
        result = run_attack(oracle, target, x_init, attack_config(config, victim, plan))
    except OracleError as exc:
        status, error = ORACLE_FAILED, f"{type(exc).__name__}: {exc}"
    except (InitializationFailed, InvalidStartError) as exc:
        status, error = INIT_FAILED, f"{type(exc).__name__}: {exc}"
    except AttackError as exc:
        status, error = FAILED, f"{type(exc).__name__}: {exc}"
    else:
        return RunOutcome(plan, result.trace, oracle.ledger.used)
    log.warning("run %s failed: %s", plan.run_id, error)
    trace = RunTrace(initial_queries=oracle.ledger.used, status=status)
    return RunOutcome(plan, trace, oracle.ledger.used, status, error)


def milestone_rows(outcome, milestones):
    """
    One row per milestone. A milestone the run never got to (failure, early
    stop, or beyond the budget) is marked unreached and carries the final
    best MSE.
    """
    plan, trace = outcome.plan, outcome.trace
    used = trace.total_queries
    rows = []
    for m in sorted(milestones):
        reached = outcome.status == OK and m <= used
        mse = trace.best_mse_at(m)
        rows.append(ResultRow(plan.run_id, plan.seed, plan.variant, m, mse, reached))
    return rows


def _execute_star(args):
    return execute_run(*args)


def run_experiment(config, out_dir=None):
    """Validate, run the grid and write ``results.csv``, ``summary.csv`` and traces."""
    config.validate()
    victim = resolve_victim(config)
    plans = plan_runs(config, len(victim.pairs))
    if config.workers > 1 and len(plans) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(_execute_star, [(config, p) for p in plans]))
    else:
        outcomes = [execute_run(config, p, victim) for p in plans]

    rows = [row for o in outcomes for row in milestone_rows(o, config.milestones)]
    summary = summarize(rows, config.mse_threshold) if rows else []
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results(rows, out_dir / "results.csv")
    write_summary(summary, out_dir / "summary.csv")
    for o in outcomes:
        meta = {
            "run_id": o.plan.run_id,
            "seed": o.plan.seed,
            "variant": o.plan.variant,
            "oracle": victim.name,
            "guide_mode": config.guide_mode,
        }
        write_trace(o.trace, trace_path(out_dir, o.plan.run_id), meta)
    return ExperimentResult(rows, outcomes, summary)
