"""The hybrid optimization loop.

Each iteration picks a categorical combination with the tree policy, fits one
GP per candidate kernel on the full mixed history, selects a kernel with the
configured criterion, maximizes expected improvement over the continuous
coordinates with the categories held fixed, evaluates the objective and
back-propagates the reward.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import (
    Encoding,
    MixedPoint,
    ProblemSpec,
    SampleHistory,
    encode_cat_indices,
    encode_points,
    generate_pilots,
)
from .gp import FitConfig, FitError, GPModel, expected_improvement, fit
from .kernels import DEFAULT_KERNELS, KernelParams, kernel_by_name
from .selection import CRITERIA, CandidateScore, Criterion, criterion_values, select_kernel
from .tree import CategoryTree, RewardVariant, Strategy, backpropagate, dirichlet_select, ucts_select

log = logging.getLogger(__name__)

Objective = Callable[[MixedPoint], float]

# named RNG substreams
_PILOTS, _TREE, _FIT, _ACQ, _INIT, _RANDOM = range(6)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; order of use does not matter."""
    return np.random.default_rng([int(seed), *map(int, key)])


class ConfigError(ValueError):
    pass


class EvaluationError(RuntimeError):
    pass


@dataclass
class RunConfig:
    n0: int = 10
    budget: int = 100
    strategy: Strategy = Strategy.UCTS
    criterion: Criterion = Criterion.R_HALF
    kernels: tuple[str, ...] = tuple(DEFAULT_KERNELS)
    c_ucb: float = math.sqrt(2.0)
    epsilon: float = 0.1
    alpha0: float = 1.0
    reward_variant: RewardVariant = RewardVariant.OURS
    ei_probes: int = 100
    ei_steps: int = 50
    acq_scope: str = "conditional"
    encoding: Encoding = Encoding.INTEGER
    fit: FitConfig = field(default_factory=FitConfig)
    warm_start: bool = True
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        try:
            self.strategy = Strategy(self.strategy)
            self.criterion = Criterion(self.criterion)
            self.reward_variant = RewardVariant(self.reward_variant)
            self.encoding = Encoding(self.encoding)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.kernels = tuple(self.kernels)
        for name in self.kernels:
            try:
                kernel_by_name(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.kernels:
            raise ConfigError("at least one candidate kernel is required")
        if self.n0 < 2:
            raise ConfigError(f"need at least 2 pilot samples, got {self.n0}")
        if self.budget < self.n0:
            raise ConfigError(f"budget {self.budget} is smaller than the pilot count {self.n0}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.c_ucb < 0:
            raise ConfigError("c_ucb must be nonnegative")
        if self.alpha0 <= 0:
            raise ConfigError("alpha0 must be positive")
        if self.ei_probes < 1 or self.ei_steps < 0:
            raise ConfigError("ei_probes must be >= 1 and ei_steps >= 0")
        if self.acq_scope not in ("conditional", "global"):
            raise ConfigError("acq_scope must be 'conditional' or 'global'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n0": self.n0,
            "budget": self.budget,
            "strategy": self.strategy.value,
            "criterion": self.criterion.value,
            "kernels": list(self.kernels),
            "c_ucb": self.c_ucb,
            "epsilon": self.epsilon,
            "alpha0": self.alpha0,
            "reward_variant": self.reward_variant.value,
            "ei_probes": self.ei_probes,
            "ei_steps": self.ei_steps,
            "acq_scope": self.acq_scope,
            "encoding": self.encoding.value,
            "fit": self.fit.to_dict(),
            "warm_start": self.warm_start,
            "workers": self.workers,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "fit" in d:
            try:
                d["fit"] = FitConfig.from_dict(d["fit"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if "kernels" in d:
            d["kernels"] = tuple(d["kernels"])
        return cls(**d)


@dataclass
class IterationRecord:
    iteration: int
    is_pilot: bool
    point: MixedPoint
    value: float  # objective in its own sign
    best_so_far: float  # in the objective's own sign
    kernel: str = ""
    criterion: dict[str, float] = field(default_factory=dict)
    loglik: dict[str, float] = field(default_factory=dict)
    acq: dict[str, float] = field(default_factory=dict)
    tree_decisions: int = 0
    wall_time: float = 0.0


@dataclass
class RunTrace:
    problem: ProblemSpec
    config: dict[str, Any]
    method: str
    records: list[IterationRecord] = field(default_factory=list)
    tree: dict | None = None
    final_params: dict[str, dict[str, float]] = field(default_factory=dict)
    initial_kernel: str = ""
    error: str | None = None

    @property
    def kernel_names(self) -> list[str]:
        return list(self.config.get("kernels", []))

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.records])

    @property
    def best(self) -> float:
        return self.records[-1].best_so_far

    @property
    def argbest(self) -> MixedPoint:
        internal = self.problem.sign * self.values
        return self.records[int(np.argmax(internal))].point

    def selection_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.kernel_names}
        for r in self.records:
            if r.kernel:
                counts[r.kernel] = counts.get(r.kernel, 0) + 1
        return counts

    def append(self, point: MixedPoint, value: float, is_pilot: bool, **extra) -> IterationRecord:
        sign = self.problem.sign
        if self.records:
            best = sign * max(sign * self.records[-1].best_so_far, sign * value)
        else:
            best = value
        rec = IterationRecord(len(self.records), is_pilot, point, float(value), float(best), **extra)
        self.records.append(rec)
        return rec


def _unit_to_model(problem: ProblemSpec, unit: np.ndarray) -> np.ndarray:
    """Snap unit-cube coordinates so integer-relaxed variables sit on the lattice."""
    return problem.normalize(problem.denormalize(unit))


def maximize_ei_conditional(
    model: GPModel,
    x_cat: Sequence[int],
    problem: ProblemSpec,
    M: int,
    rng: np.random.Generator,
    steps: int = 50,
    y_best: float | None = None,
    encoding: Encoding | str = Encoding.INTEGER,
) -> tuple[np.ndarray, float]:
    """Maximize EI over the continuous coordinates with categories fixed at ``x_cat``.

    ``M`` uniform probes are scored, then a bounded compass search refines the
    best one for ``steps`` polls.  Returns the continuous coordinates in
    declared units and the EI reached there.
    """
    if M < 1:
        raise ValueError("need at least one probe")
    if y_best is None:
        y_best = float(np.max(model.y) + model.y_mean)
    cat_row = encode_cat_indices([tuple(x_cat)], problem, encoding)
    d = problem.n_con

    def ei(unit: np.ndarray) -> np.ndarray:
        cat = np.repeat(cat_row, unit.shape[0], axis=0)
        return expected_improvement(model, (cat, unit), y_best)

    if d == 0:
        return np.zeros(0), float(ei(np.zeros((1, 0)))[0])

    probes = _unit_to_model(problem, rng.random((M, d)))
    vals = ei(probes)
    j = int(np.argmax(vals))
    x, fx = probes[j], float(vals[j])

    step = 0.1
    directions = np.vstack([np.eye(d), -np.eye(d)])
    for _ in range(steps):
        cand = _unit_to_model(problem, np.clip(x + step * directions, 0.0, 1.0))
        cv = ei(cand)
        k = int(np.argmax(cv))
        if cv[k] > fx:
            x, fx = cand[k], float(cv[k])
        else:
            step *= 0.5
            if step < 1e-9:
                break
    return problem.denormalize(x), fx


def maximize_ei_global(
    model: GPModel,
    problem: ProblemSpec,
    M: int,
    rng: np.random.Generator,
    steps: int = 50,
    y_best: float | None = None,
    encoding: Encoding | str = Encoding.INTEGER,
) -> tuple[tuple[int, ...], np.ndarray, float]:
    """EI maximum over the whole mixed space: random categorical probes, then a continuous refine."""
    if y_best is None:
        y_best = float(np.max(model.y) + model.y_mean)
    cats = np.column_stack(
        [rng.integers(0, k, size=M) for k in problem.cat_sizes]
    ) if problem.n_cat else np.zeros((M, 0), dtype=int)
    unit = _unit_to_model(problem, rng.random((M, problem.n_con)))
    vals = expected_improvement(model, (encode_cat_indices(cats, problem, encoding), unit), y_best)
    best_cat = tuple(int(c) for c in cats[int(np.argmax(vals))])
    x_con, ei = maximize_ei_conditional(
        model, best_cat, problem, M, rng, steps, y_best, encoding
    )
    return best_cat, x_con, max(ei, float(np.max(vals)))


@dataclass
class Proposal:
    point: MixedPoint
    kernel: str
    scores: list[CandidateScore]
    ei: float
    tree_decisions: int
    failures: dict[str, str] = field(default_factory=dict)


class HybridOptimizer:
    """Mutable optimizer state: history, tree, warm-start parameters."""

    def __init__(self, problem: ProblemSpec, cfg: RunConfig):
        self.problem = problem
        self.cfg = cfg
        self.history = SampleHistory()
        self.tree = CategoryTree(problem.cat_sizes, cfg.alpha0, cfg.reward_variant)
        self.kernel_specs = [kernel_by_name(k) for k in cfg.kernels]
        self.params: dict[str, KernelParams] = {}
        self.initial_kernel = ""

    def tell(self, point: MixedPoint, value: float) -> None:
        """Ingest an objective value (in the objective's own sign)."""
        y = self.problem.sign * float(value)
        self.history.append(point, y)
        backpropagate(self.tree, point.cat, y, self.cfg.strategy)

    def _encoded_history(self):
        return encode_points(self.history.X, self.problem, self.cfg.encoding)

    def fit_initial(self) -> str:
        """Fit one randomly chosen candidate kernel on the pilots."""
        rng = substream(self.cfg.seed, _INIT)
        k = int(rng.integers(len(self.kernel_specs)))
        name = self.cfg.kernels[k]
        try:
            model = fit(
                self._encoded_history(), self.history.Y, self.kernel_specs[k],
                self.cfg.fit, substream(self.cfg.seed, _INIT, 1),
            )
            self.params[name] = model.params
        except FitError as exc:
            log.warning("initial fit with %s failed: %s", name, exc)
        self.initial_kernel = name
        return name

    def _fit_one(self, k: int, X, Y, iteration: int) -> GPModel:
        name = self.cfg.kernels[k]
        warm = self.params.get(name) if self.cfg.warm_start else None
        return fit(
            X, Y, self.kernel_specs[k], self.cfg.fit,
            substream(self.cfg.seed, _FIT, iteration, k), warm_start=warm,
        )

    def propose_next(self) -> Proposal:
        if len(self.history) < 2:
            raise ValueError("need at least two samples before proposing")
        cfg = self.cfg
        iteration = len(self.history)
        before = self.tree.decisions
        tree_rng = substream(cfg.seed, _TREE, iteration)
        if cfg.strategy is Strategy.UCTS:
            path = ucts_select(self.tree, cfg.c_ucb, cfg.epsilon, tree_rng)
        else:
            path = dirichlet_select(self.tree, tree_rng)
        decisions = self.tree.decisions - before

        X = self._encoded_history()
        Y = np.asarray(self.history.Y)
        y_best = float(Y.max())
        K = len(self.kernel_specs)
        if cfg.workers > 1 and K > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(self._fit_one, k, X, Y, iteration) for k in range(K)]
                outcomes = []
                for fut in futures:
                    try:
                        outcomes.append(fut.result())
                    except FitError as exc:
                        outcomes.append(exc)
        else:
            outcomes = []
            for k in range(K):
                try:
                    outcomes.append(self._fit_one(k, X, Y, iteration))
                except FitError as exc:
                    outcomes.append(exc)

        failures = {}
        models: dict[int, GPModel] = {}
        scores: list[CandidateScore] = []
        con_results: dict[int, tuple[np.ndarray, float]] = {}
        for k, out in enumerate(outcomes):
            name = cfg.kernels[k]
            if isinstance(out, FitError):
                failures[name] = str(out)
                continue
            models[k] = out
            # identical probe stream for every candidate
            acq_rng = substream(cfg.seed, _ACQ, iteration)
            x_con, ei = maximize_ei_conditional(
                out, path, self.problem, cfg.ei_probes, acq_rng, cfg.ei_steps, y_best, cfg.encoding
            )
            con_results[k] = (x_con, ei)
            acq = ei
            if cfg.acq_scope == "global":
                _, _, acq = maximize_ei_global(
                    out, self.problem, cfg.ei_probes, substream(cfg.seed, _ACQ, iteration, 1),
                    cfg.ei_steps, y_best, cfg.encoding,
                )
            scores.append(CandidateScore(k, out.log_lik, acq, out.spec.n_params))
        if not scores:
            raise FitError("all candidate kernel fits failed", list(failures.values()))
        for k, m in models.items():
            self.params[cfg.kernels[k]] = m.params

        criterion_values(cfg.criterion, scores, n=len(Y), step=iteration + 1, budget=cfg.budget)
        winner = scores[select_kernel(scores)].kernel
        x_con, ei = con_results[winner]
        point = MixedPoint.make(path, x_con)
        return Proposal(point, cfg.kernels[winner], scores, ei, decisions, failures)


def run(problem: ProblemSpec, objective: Objective, cfg: RunConfig, method: str = "hybrid") -> RunTrace:
    """Pilots, then propose/evaluate/back-propagate until ``cfg.budget`` evaluations."""
    opt = HybridOptimizer(problem, cfg)
    trace = RunTrace(problem, cfg.to_dict(), method)

    def evaluate(point: MixedPoint) -> float:
        try:
            value = float(objective(point))
        except Exception as exc:
            raise EvaluationError(f"objective failed at {point}: {exc}") from exc
        if not math.isfinite(value):
            raise EvaluationError(f"objective returned {value} at {point}")
        return value

    try:
        for p in generate_pilots(problem, cfg.n0, int(substream(cfg.seed, _PILOTS).integers(2**31))):
            t0 = time.perf_counter()
            value = evaluate(p)
            opt.tell(p, value)
            trace.append(p, value, True, wall_time=time.perf_counter() - t0)
        trace.initial_kernel = opt.fit_initial()

        while len(opt.history) < cfg.budget:
            t0 = time.perf_counter()
            prop = opt.propose_next()
            value = evaluate(prop.point)
            opt.tell(prop.point, value)
            names = cfg.kernels
            trace.append(
                prop.point, value, False,
                kernel=prop.kernel,
                criterion={names[s.kernel]: s.criterion_value for s in prop.scores},
                loglik={names[s.kernel]: s.loglik for s in prop.scores},
                acq={names[s.kernel]: s.acq for s in prop.scores},
                tree_decisions=prop.tree_decisions,
                wall_time=time.perf_counter() - t0,
            )
    except (EvaluationError, FitError) as exc:
        log.error("run aborted at evaluation %d: %s", len(trace.records), exc)
        trace.error = f"{type(exc).__name__}: {exc}"

    trace.tree = opt.tree.to_dict()
    trace.final_params = {k: v.as_dict(kernel_by_name(k)) for k, v in opt.params.items()}
    return trace
