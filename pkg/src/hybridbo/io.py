"""Trace persistence: per-evaluation CSV, run summary JSON and tree dumps."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

from .core import ProblemSpec
from .optimizer import IterationRecord, RunTrace

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.json"
TREE_FILE = "tree.json"


def _fmt(v: float) -> str:
    return repr(float(v))


def trace_columns(trace: RunTrace) -> list[str]:
    names = [v.name for v in trace.problem.variables]
    kernels = trace.kernel_names
    return (
        ["iter", "is_pilot", *names, "y", "best_so_far", "kernel"]
        + [f"crit_{k}" for k in kernels]
        + [f"loglik_{k}" for k in kernels]
        + [f"acq_{k}" for k in kernels]
        + ["tree_decisions", "wall_time"]
    )


def write_trace_csv(trace: RunTrace, path: str | Path) -> None:
    kernels = trace.kernel_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_columns(trace))
        for r in trace.records:
            values = trace.problem.decode(r.point)
            row: list[Any] = [r.iteration, int(r.is_pilot)]
            row += [_fmt(v) if isinstance(v, float) else v for v in values.values()]
            row += [_fmt(r.value), _fmt(r.best_so_far), r.kernel]
            for table in (r.criterion, r.loglik, r.acq):
                row += [_fmt(table[k]) if k in table else "" for k in kernels]
            row += [r.tree_decisions, _fmt(r.wall_time)]
            w.writerow(row)


def read_trace_csv(path: str | Path, problem: ProblemSpec, config: dict | None = None) -> RunTrace:
    """Parse a trace CSV back into a :class:`RunTrace` (records only)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
        fh.seek(0)
        header = next(csv.reader(fh))
    kernels = [c[len("crit_"):] for c in header if c.startswith("crit_")]
    config = dict(config or {})
    config.setdefault("kernels", kernels)
    trace = RunTrace(problem, config, config.get("method", ""))
    names = [v.name for v in problem.variables]
    for row in rows:
        point = problem.point_from_values({n: row[n] for n in names})
        tables = []
        for prefix in ("crit_", "loglik_", "acq_"):
            tables.append(
                {k: float(row[prefix + k]) for k in kernels if row[prefix + k] != ""}
            )
        trace.records.append(
            IterationRecord(
                iteration=int(row["iter"]),
                is_pilot=bool(int(row["is_pilot"])),
                point=point,
                value=float(row["y"]),
                best_so_far=float(row["best_so_far"]),
                kernel=row["kernel"],
                criterion=tables[0],
                loglik=tables[1],
                acq=tables[2],
                tree_decisions=int(row["tree_decisions"]),
                wall_time=float(row["wall_time"]),
            )
        )
    return trace


def summary_dict(trace: RunTrace) -> dict[str, Any]:
    n_pilots = sum(r.is_pilot for r in trace.records)
    out = {
        "method": trace.method,
        "evaluations": len(trace.records),
        "pilot_evaluations": n_pilots,
        "sequential_evaluations": len(trace.records) - n_pilots,
        "final_best": trace.best if trace.records else None,
        "argbest": trace.problem.decode(trace.argbest) if trace.records else None,
        "initial_kernel": trace.initial_kernel,
        "selection_counts": trace.selection_counts(),
        "final_params": trace.final_params,
        "tree_dump": TREE_FILE if trace.tree is not None else None,
        "error": trace.error,
    }
    return out


def write_run(trace: RunTrace, out_dir: str | Path) -> Path:
    """Write config, problem, trace, summary and tree files into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / CONFIG_FILE, "w") as fh:
        json.dump(
            {"problem": trace.problem.to_dict(), "config": trace.config, "method": trace.method},
            fh, indent=2,
        )
    write_trace_csv(trace, out / TRACE_FILE)
    with open(out / SUMMARY_FILE, "w") as fh:
        json.dump(summary_dict(trace), fh, indent=2)
    if trace.tree is not None:
        with open(out / TREE_FILE, "w") as fh:
            json.dump(trace.tree, fh)
    return out


def load_run(run_dir: str | Path) -> RunTrace:
    run_dir = Path(run_dir)
    with open(run_dir / CONFIG_FILE) as fh:
        meta = json.load(fh)
    problem = ProblemSpec.from_dict(meta["problem"])
    trace = read_trace_csv(run_dir / TRACE_FILE, problem, meta["config"])
    trace.method = meta.get("method", "")
    tree_path = run_dir / TREE_FILE
    if tree_path.exists():
        with open(tree_path) as fh:
            trace.tree = json.load(fh)
    with open(run_dir / SUMMARY_FILE) as fh:
        summary = json.load(fh)
    trace.final_params = summary.get("final_params", {})
    trace.initial_kernel = summary.get("initial_kernel", "")
    trace.error = summary.get("error")
    return trace
