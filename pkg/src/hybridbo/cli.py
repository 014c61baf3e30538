"""Command-line entry point.

Subcommands::

    hybridbo run --problem friedman8c --out runs/f8c
    hybridbo bench run --problem friedman8c --method hybridm,random --seeds 0..9 --out runs/b
    hybridbo dump-tree runs/f8c
    hybridbo verify --suite all

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 verification failure.  ``HYBRIDBO_OUT_DIR`` overrides ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .bench import BENCHMARKS, METHODS, BenchmarkFn, ConfigurationError, batch_experiment, get_benchmark
from .core import MixedPoint, ProblemSpec, SpecError
from .io import load_run, write_run
from .kernels import DEFAULT_KERNELS
from .optimizer import ConfigError, RunConfig, run
from .selection import CRITERIA

log = logging.getLogger("hybridbo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
OUT_ENV = "HYBRIDBO_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliInvocation:
    subcommand: str
    config: RunConfig | None = None
    benchmark: BenchmarkFn | None = None
    methods: tuple[str, ...] = ()
    seeds: tuple[int, ...] = ()
    out: Path | None = None
    run_dir: Path | None = None
    suite: str = "all"
    overrides: dict[str, Any] = field(default_factory=dict)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0..9"`` (inclusive) or ``"1,4,7"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}; use a..b or a,b,c") from None


def load_objective(ref: str) -> Callable[[dict], float]:
    module, _, attr = ref.partition(":")
    if not attr:
        raise UsageError(f"objective must look like module:function, got {ref!r}")
    try:
        return getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise UsageError(f"cannot load objective {ref!r}: {exc}") from None


def resolve_problem(ref: str, objective: str | None) -> BenchmarkFn:
    """A benchmark name, or a problem JSON file plus a ``module:function`` objective.

    File-based objectives receive ``{variable name: value}`` dictionaries.
    """
    if ref in BENCHMARKS:
        return get_benchmark(ref)
    path = Path(ref)
    if not path.exists():
        raise UsageError(
            f"unknown problem {ref!r}: not a file and not one of {', '.join(BENCHMARKS)}"
        )
    with open(path) as fh:
        doc = json.load(fh)
    problem = ProblemSpec.from_dict(doc)
    objective = objective or doc.get("objective")
    if not objective:
        raise UsageError("problem files need an objective (--objective module:function)")
    fn = load_objective(objective)

    def evaluate(x: MixedPoint) -> float:
        return float(fn(problem.decode(x)))

    return BenchmarkFn(path.stem, problem, evaluate, doc.get("known_max"))


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, help="benchmark name or problem JSON file")
    p.add_argument("--objective", help="module:function for problem files")
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--budget", type=int, help="total evaluations including pilots")
    p.add_argument("--pilots", type=int, help="number of pilot samples")
    p.add_argument("--criterion", help=f"one of {', '.join(CRITERIA)}")
    p.add_argument("--kernels", help=f"comma-separated subset of {', '.join(DEFAULT_KERNELS)}")
    p.add_argument("--c-ucb", type=float, dest="c_ucb")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--restarts", type=int, help="GP fit restarts")
    p.add_argument("--acq-scope", choices=("conditional", "global"), dest="acq_scope")
    p.add_argument("--workers", type=int, help="threads for candidate fits")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridbo", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="single optimization run")
    _add_run_options(p_run)
    p_run.add_argument("--strategy", choices=("ucts", "dirichlet"))
    p_run.add_argument("--seed", type=int)

    p_bench = sub.add_parser("bench", help="batch experiments")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    p_brun = bench_sub.add_parser("run", help="run methods over seeds")
    _add_run_options(p_brun)
    p_brun.add_argument("--method", default="hybridm,random",
                        help=f"comma-separated subset of {', '.join(METHODS)}")
    p_brun.add_argument("--seeds", default="0..9")

    p_dump = sub.add_parser("dump-tree", help="print the tree of a finished run")
    p_dump.add_argument("run_dir")
    p_dump.add_argument("--depth", type=int, default=1, help="deepest level to print")

    p_ver = sub.add_parser("verify", help="run oracle and property checks")
    p_ver.add_argument("--suite", default="all",
                       choices=("all", "kernels", "gp", "tree", "selection"))
    return parser


def _resolve_config(args: argparse.Namespace) -> tuple[RunConfig, dict[str, Any]]:
    base: dict[str, Any] = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
        # a run directory's config.json nests the resolved RunConfig
        if "config" in base and "problem" in base:
            base = base["config"]
    overrides = {}
    for key, attr in (("budget", "budget"), ("n0", "pilots"), ("criterion", "criterion"),
                      ("c_ucb", "c_ucb"), ("epsilon", "epsilon"), ("acq_scope", "acq_scope"),
                      ("workers", "workers"), ("strategy", "strategy"), ("seed", "seed")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "kernels", None):
        overrides["kernels"] = tuple(k.strip() for k in args.kernels.split(",") if k.strip())
    if overrides.get("criterion") is not None and overrides["criterion"] not in CRITERIA:
        raise UsageError(f"unknown criterion {overrides['criterion']!r}; choose from {', '.join(CRITERIA)}")
    merged = {**base, **overrides}
    if getattr(args, "restarts", None) is not None:
        fit_cfg = dict(merged.get("fit", {}))
        fit_cfg["restarts"] = args.restarts
        merged["fit"] = fit_cfg
    return RunConfig.from_dict(merged), overrides


def parse_and_validate(argv: Sequence[str] | None = None) -> CliInvocation:
    """Parse arguments into a fully resolved invocation.

    Raises :class:`UsageError` (or a config/spec error) with an actionable
    message on bad input.
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO)
    if args.subcommand == "verify":
        return CliInvocation("verify", suite=args.suite)
    if args.subcommand == "dump-tree":
        return CliInvocation("dump-tree", run_dir=Path(args.run_dir), overrides={"depth": args.depth})

    cfg, overrides = _resolve_config(args)
    bench = resolve_problem(args.problem, args.objective)
    out = os.environ.get(OUT_ENV) or args.out
    if not out:
        raise UsageError(f"an output directory is required (--out or ${OUT_ENV})")
    if args.subcommand == "run":
        return CliInvocation("run", cfg, bench, out=Path(out), overrides=overrides)

    methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    seeds = parse_seeds(args.seeds)
    if not seeds:
        raise UsageError("need at least one seed")
    return CliInvocation("bench", cfg, bench, methods, seeds, Path(out), overrides=overrides)


def _cmd_run(inv: CliInvocation) -> int:
    trace = run(inv.benchmark.problem, inv.benchmark.evaluate, inv.config,
                method=inv.config.strategy.value)
    out = write_run(trace, inv.out)
    print(f"final best {trace.best!r} after {len(trace.records)} evaluations -> {out}")
    if trace.error:
        print(f"run aborted: {trace.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_bench(inv: CliInvocation) -> int:
    out = inv.out
    out.mkdir(parents=True, exist_ok=True)

    def save(method, seed, trace):
        write_run(trace, out / method / f"seed_{seed}")
        print(f"{method} seed {seed}: final best {trace.best!r}", flush=True)

    result = batch_experiment(inv.methods, inv.benchmark, inv.config, inv.seeds, on_trace=save)

    rows = result.summary_rows()
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["method", "iter", "mean", "std", "n_runs"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "mean": repr(r["mean"]), "std": repr(r["std"])})
    summary = {
        "problem": inv.benchmark.name,
        "known_max": inv.benchmark.known_max,
        "budget": inv.config.budget,
        "pilots": inv.config.n0,
        "config": inv.config.to_dict(),
        "methods": {},
    }
    for m in inv.methods:
        finals = result.finals(m)
        vals = np.array(list(finals.values()))
        summary["methods"][m] = {
            "final_best": {str(s): v for s, v in finals.items()},
            "mean_final_best": float(vals.mean()) if vals.size else None,
            "std_final_best": float(vals.std()) if vals.size else None,
            "failed_seeds": result.failed[m],
        }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    for m, s in summary["methods"].items():
        print(f"{m}: mean final best {s['mean_final_best']}")
    return EXIT_RUNTIME if any(result.failed.values()) else EXIT_OK


def _cmd_dump_tree(inv: CliInvocation) -> int:
    trace = load_run(inv.run_dir)
    if trace.tree is None:
        raise UsageError(f"{inv.run_dir} has no tree dump")
    depth = inv.overrides.get("depth", 1)
    for node in trace.tree["nodes"]:
        if len(node["path"]) <= depth:
            alpha = "" if node["alpha"] is None else " alpha=" + ",".join(f"{a:.3g}" for a in node["alpha"])
            print(f"{'/'.join(map(str, node['path'])) or '<root>'}: n={node['n']} rbar={node['rbar']:.6g}{alpha}")
    return EXIT_OK


def _cmd_verify(inv: CliInvocation) -> int:
    from .verify import verify

    results = verify(inv.suite)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.suite}: {r.name} ({r.detail})")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        inv = parse_and_validate(argv)
    except (UsageError, ConfigError, ConfigurationError, SpecError, ValueError, OSError) as exc:
        print(f"hybridbo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handlers = {"run": _cmd_run, "bench": _cmd_bench, "dump-tree": _cmd_dump_tree,
                "verify": _cmd_verify}
    try:
        return handlers[inv.subcommand](inv)
    except UsageError as exc:
        print(f"hybridbo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any runtime failure maps to one exit code
        print(f"hybridbo: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
