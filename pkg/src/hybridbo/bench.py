"""Synthetic mixed-variable benchmarks, a random-search baseline and batch drivers."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import MixedPoint, ProblemSpec, SpecError, VariableSpec, uniform_points
from .optimizer import RunConfig, RunTrace, _RANDOM, run, substream

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkFn:
    name: str
    problem: ProblemSpec
    evaluate: Callable[[MixedPoint], float]
    known_max: float | None = None

    def __call__(self, x: MixedPoint) -> float:
        return self.evaluate(x)


# -- Friedman with inactive categorical variables ---------------------------------

FRIEDMAN_CAT_SIZES = (3, 5, 3, 4, 4, 4, 2, 2)  # x7 .. x14


def friedman8c_problem() -> ProblemSpec:
    variables = [VariableSpec.continuous(f"x{i}", 0.0, 1.0) for i in range(1, 7)]
    variables += [
        VariableSpec.categorical(f"x{i}", range(k))
        for i, k in zip(range(7, 15), FRIEDMAN_CAT_SIZES)
    ]
    return ProblemSpec(variables, "maximize")


def friedman8c(x: MixedPoint) -> float:
    """Friedman function with category switches; x6, x8 and x10..x14 are inactive."""
    if len(x.con) != 6 or len(x.cat) != 8:
        raise SpecError("friedman8c expects 6 continuous and 8 categorical coordinates")
    con = np.asarray(x.con, dtype=float)
    if np.any(con < 0.0) or np.any(con > 1.0):
        raise SpecError(f"continuous coordinates outside [0, 1]: {x.con}")
    for c, k in zip(x.cat, FRIEDMAN_CAT_SIZES):
        if not 0 <= c < k:
            raise SpecError(f"categorical coordinates out of range: {x.cat}")
    x1, x2, x3, x4, x5, _ = con
    x7, _, x9 = x.cat[:3]
    value = 20.0 * (x3 - 0.5) ** 2 + 5.0 * x5
    if x7 == 0:
        value += 10.0 * math.sin(math.pi * x1 * x2)
    value += (10.0, -10.0, 5.0)[x9] * x4
    return value


# -- discrete Rosenbrock ------------------------------------------------------------


def rosenbrock(z: Sequence[float]) -> float:
    """Negated, scaled Rosenbrock; maximum 0 at all-ones."""
    z = np.asarray(z, dtype=float)
    return -float(np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (z[:-1] - 1.0) ** 2)) / 10000.0


def rosenbrock_problem(d: int = 7, discrete_dims: Iterable[int] = (5, 6, 7)) -> ProblemSpec:
    """Variables ``x1..xd``; ``discrete_dims`` (1-based) take the integers -5..5 as categories."""
    discrete = set(discrete_dims)
    if not discrete <= set(range(1, d + 1)):
        raise SpecError("discrete dimensions must lie in 1..d")
    variables = []
    for i in range(1, d + 1):
        if i in discrete:
            variables.append(VariableSpec.categorical(f"x{i}", range(-5, 6)))
        else:
            variables.append(VariableSpec.continuous(f"x{i}", -5.0, 5.0))
    return ProblemSpec(variables, "maximize")


def discrete_rosenbrock(x: MixedPoint, d: int = 7, discrete_dims: Iterable[int] = (5, 6, 7)) -> float:
    discrete = sorted(set(discrete_dims))
    if len(x.cat) != len(discrete) or len(x.con) != d - len(discrete):
        raise SpecError("point does not match the discrete/continuous split")
    con = iter(x.con)
    cat = iter(x.cat)
    z = []
    for i in range(1, d + 1):
        if i in discrete:
            c = next(cat)
            if not 0 <= c <= 10:
                raise SpecError(f"category index {c} outside 0..10")
            z.append(c - 5)
        else:
            v = next(con)
            if not -5.0 <= v <= 5.0:
                raise SpecError(f"coordinate {v} outside [-5, 5]")
            z.append(v)
    return rosenbrock(z)


# -- category-switched generator ---------------------------------------------------


class CategorySwitched:
    """Dispatch to one continuous function per categorical combination."""

    def __init__(self, functions: dict[tuple[int, ...], Callable[[np.ndarray], float]]):
        self.functions = dict(functions)

    def __call__(self, x: MixedPoint) -> float:
        return category_switched(self.functions, x)


def category_switched(
    template: dict[tuple[int, ...], Callable[[np.ndarray], float]], x: MixedPoint
) -> float:
    try:
        f = template[tuple(x.cat)]
    except KeyError:
        raise ConfigurationError(f"no function registered for categories {x.cat}") from None
    return float(f(np.asarray(x.con, dtype=float)))


def _bowl(t):
    return 1.0 - (t[0] - 0.2) ** 2 - (t[1] - 0.7) ** 2


def _bump(t):
    return 1.5 * math.sin(math.pi * t[0]) * math.sin(math.pi * t[1])


def _ridge(t):
    return 1.0 - abs(t[0] - t[1])


def func3c_like() -> BenchmarkFn:
    """Three categorical variables (3 values each) switching between 2-D shapes.

    The first category picks the shape, the second adds an offset and the
    third scales it.  Maximum 4.0 at categories (1, 2, 1), point (0.5, 0.5).
    """
    shapes = (_bowl, _bump, _ridge)
    offsets = (0.0, 0.5, 1.0)
    scales = (1.0, 2.0, 0.5)
    table = {}
    for a in range(3):
        for b in range(3):
            for c in range(3):
                table[(a, b, c)] = (
                    lambda t, f=shapes[a], o=offsets[b], s=scales[c]: s * f(t) + o
                )
    problem = ProblemSpec(
        [VariableSpec.continuous("t1", 0.0, 1.0), VariableSpec.continuous("t2", 0.0, 1.0)]
        + [VariableSpec.categorical(n, ("0", "1", "2")) for n in ("c1", "c2", "c3")],
        "maximize",
    )
    return BenchmarkFn("func3c-like", problem, CategorySwitched(table), known_max=4.0)


BENCHMARKS: dict[str, Callable[[], BenchmarkFn]] = {
    "friedman8c": lambda: BenchmarkFn("friedman8c", friedman8c_problem(), friedman8c, 30.0),
    "rosenbrock": lambda: BenchmarkFn(
        "rosenbrock", rosenbrock_problem(), discrete_rosenbrock, 0.0
    ),
    "func3c-like": func3c_like,
}


def get_benchmark(name: str) -> BenchmarkFn:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}"
        ) from None


# -- baseline and batches -----------------------------------------------------------


def random_baseline(
    problem: ProblemSpec, objective: Callable[[MixedPoint], float], budget: int, seed: int
) -> RunTrace:
    """Uniform random search over the full mixed domain."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = substream(seed, _RANDOM)
    trace = RunTrace(problem, {"budget": budget, "seed": seed, "kernels": []}, "random")
    for p in uniform_points(problem, budget, rng):
        t0 = time.perf_counter()
        value = float(objective(p))
        trace.append(p, value, False, wall_time=time.perf_counter() - t0)
    return trace


METHODS = ("hybridm", "hybridd", "random")


def run_method(
    method: str, bench: BenchmarkFn, cfg: RunConfig, seed: int
) -> RunTrace:
    if method == "random":
        return random_baseline(bench.problem, bench.evaluate, cfg.budget, seed)
    if method == "hybridm":
        cfg = dataclasses.replace(cfg, strategy="ucts", seed=seed)
    elif method == "hybridd":
        cfg = dataclasses.replace(cfg, strategy="dirichlet", seed=seed)
    else:
        raise ConfigurationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return run(bench.problem, bench.evaluate, cfg, method=method)


@dataclass
class BatchResult:
    budget: int
    traces: dict[str, dict[int, RunTrace]]  # method -> seed -> trace
    failed: dict[str, list[int]]

    def best_matrix(self, method: str) -> np.ndarray:
        runs = self.traces[method]
        return np.array([runs[s].best_so_far for s in sorted(runs)])

    def mean_std(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        m = self.best_matrix(method)
        return m.mean(axis=0), m.std(axis=0)

    def finals(self, method: str) -> dict[int, float]:
        return {s: t.best for s, t in sorted(self.traces[method].items())}

    def summary_rows(self) -> list[dict]:
        rows = []
        for method in self.traces:
            if not self.traces[method]:
                continue
            mean, std = self.mean_std(method)
            n = len(self.traces[method])
            for i in range(len(mean)):
                rows.append(
                    {"method": method, "iter": i, "mean": float(mean[i]),
                     "std": float(std[i]), "n_runs": n}
                )
        return rows


def batch_experiment(
    methods: Sequence[str],
    bench: BenchmarkFn,
    cfg: RunConfig,
    seeds: Sequence[int],
    on_trace: Callable[[str, int, RunTrace], None] | None = None,
) -> BatchResult:
    """Run every (method, seed) pair; failed runs are logged and excluded."""
    if not seeds:
        raise ValueError("need at least one seed")
    traces: dict[str, dict[int, RunTrace]] = {m: {} for m in methods}
    failed: dict[str, list[int]] = {m: [] for m in methods}
    for method in methods:
        for seed in seeds:
            trace = run_method(method, bench, cfg, seed)
            if trace.error or len(trace.records) != cfg.budget:
                log.warning("%s seed %d failed: %s", method, seed, trace.error)
                failed[method].append(seed)
                continue
            traces[method][seed] = trace
            if on_trace is not None:
                on_trace(method, seed, trace)
    return BatchResult(cfg.budget, traces, failed)
