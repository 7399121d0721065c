"""Delimited-text result, summary and trace files."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from ..attack import RunTrace, TraceRow

RESULT_COLUMNS = ("run_id", "seed", "variant", "milestone", "mse", "reached")
SUMMARY_COLUMNS = ("variant", "milestone", "runs", "mean_mse", "median_mse", "asr")


@dataclass(frozen=True)
class ResultRow:
    run_id: str
    seed: int
    variant: str
    milestone: int
    mse: float
    reached: bool

    def __eq__(self, other):
        if not isinstance(other, ResultRow):
            return NotImplemented
        same_mse = self.mse == other.mse or (math.isnan(self.mse) and math.isnan(other.mse))
        return same_mse and (
            (self.run_id, self.seed, self.variant, self.milestone, self.reached)
            == (other.run_id, other.seed, other.variant, other.milestone, other.reached)
        )

    __hash__ = None


def fmt_float(x):
    return "%.17g" % x


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_results(rows, path):
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(RESULT_COLUMNS)
        for r in rows:
            out.writerow([r.run_id, r.seed, r.variant, r.milestone, fmt_float(r.mse), int(r.reached)])


def read_results(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != RESULT_COLUMNS:
            raise ValueError(f"unexpected result header {header}")
        return [
            ResultRow(run_id, int(seed), variant, int(milestone), float(mse), reached == "1")
            for run_id, seed, variant, milestone, mse, reached in reader
        ]


def write_summary(summary, path):
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(SUMMARY_COLUMNS)
        for s in summary:
            out.writerow([
                s["variant"], s["milestone"], s["runs"],
                fmt_float(s["mean_mse"]), fmt_float(s["median_mse"]), fmt_float(s["asr"]),
            ])


def _cell(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return fmt_float(value)
    return value


def write_trace(trace, path, meta=None):
    """
    One ``# key=value ...`` header line (run metadata, initial state), then a
    CSV table with one row per iteration.
    """
    head = dict(meta or {})
    head.update(
        status=trace.status,
        initial_queries=trace.initial_queries,
        initial_mse=fmt_float(trace.initial_mse),
    )
    with open(path, "w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
        out = _writer(fh)
        out.writerow(TraceRow.FIELDS)
        for row in trace.rows:
            out.writerow([_cell(getattr(row, name)) for name in TraceRow.FIELDS])


def read_trace(path):
    """Returns ``(trace, meta)``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = dict(item.split("=", 1) for item in first[1:].split())
        reader = csv.reader(fh)
        next(reader)
        rows = []
        for cells in reader:
            rec = dict(zip(TraceRow.FIELDS, cells))
            rows.append(TraceRow(
                queries=int(rec["queries"]),
                iteration=int(rec["iteration"]),
                mse=float(rec["mse"]),
                best_mse=float(rec["best_mse"]),
                xi=float(rec["xi"]),
                delta=float(rec["delta"]),
                grad_norm=float(rec["grad_norm"]),
                grad_cosine=float(rec["grad_cosine"]),
                admitted=int(rec["admitted"]),
                stalled=rec["stalled"] == "1",
            ))
    trace = RunTrace(
        initial_queries=int(meta.pop("initial_queries")),
        initial_mse=float(meta.pop("initial_mse")),
        rows=rows,
        status=meta.pop("status"),
    )
    return trace, meta


def trace_path(out_dir, run_id):
    return Path(out_dir) / f"{run_id}.trace"
