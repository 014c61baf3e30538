"""On-demand oracle and property checks, grouped into suites."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracles
from .core import MixedPoint, ProblemSpec, VariableSpec, encode_points
from .gp import FitConfig, build_model, ei_from_moments, fit, log_marginal_likelihood, predict
from .kernels import DEFAULT_KERNELS, KernelParams, gram, matern52, mlp_arcsine
from .optimizer import maximize_ei_conditional
from .selection import CandidateScore, criterion_values, r_half, rank, select_kernel
from .tree import CategoryTree, Strategy, backpropagate, ucts_select

SUITES = ("kernels", "gp", "tree", "selection")


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


def _kernel_checks() -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
    def matern_vs_bessel():
        worst = 0.0
        for ratio in np.linspace(0.1, 5.0, 50):
            a = matern52([ratio], [0.0], 1.0)
            b = oracles.matern_bessel(ratio, 1.0)
            worst = max(worst, abs(a - b) / abs(b))
        return worst <= 1e-10, f"max relative error {worst:.2e}"

    def matern_value():
        v = matern52([1.0], [0.0], 1.0)
        expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
        return abs(v - expected) < 1e-14 and abs(v - 0.52399) < 1e-5, f"{v:.6f}"

    def mlp_origin():
        v = mlp_arcsine([0.0], [0.0], 1.0, 1.0, 1.0)
        return abs(v - 1 / 3) < 1e-14, f"{v:.15f}"

    def gram_psd():
        rng = np.random.default_rng(0)
        worst = np.inf
        for name, spec in DEFAULT_KERNELS.items():
            for _ in range(20):
                n = int(rng.integers(2, 9))
                X = (rng.integers(0, 5, (n, 3)).astype(float), rng.random((n, 2)))
                params = KernelParams.from_log(spec, rng.uniform(-2, 2, spec.n_params))
                params = KernelParams(**{**params.as_dict(), "nugget": 1e-6})
                K = gram(X, spec, params) + 1e-6 * np.eye(n)
                worst = min(worst, oracles.min_eigenvalue(K))
                np.linalg.cholesky(K)
        return worst > 0, f"smallest eigenvalue {worst:.3e}"

    return [
        ("matern closed form vs Bessel form", matern_vs_bessel),
        ("matern value at r = ell = 1", matern_value),
        ("arc-sine value at the origin", mlp_origin),
        ("gram plus nugget positive definite", gram_psd),
    ]


def _gp_checks():
    def loglik_dense():
        rng = np.random.default_rng(1)
        worst = 0.0
        for spec in DEFAULT_KERNELS.values():
            for n in (1, 3, 6, 10):
                X = (rng.integers(0, 3, (n, 2)).astype(float), rng.random((n, 2)))
                y = rng.normal(size=n)
                params = KernelParams.from_log(spec, rng.uniform(-1, 1, spec.n_params))
                params = KernelParams(**{**params.as_dict(), "nugget": 1e-2})
                model = build_model(spec, params, X, y)
                K = gram(X, spec, model.params) + model.params.nugget * np.eye(n)
                ref = oracles.dense_log_likelihood(K, model.y)
                worst = max(worst, abs(log_marginal_likelihood(model) - ref) / abs(ref))
        return worst <= 1e-8, f"max relative error {worst:.2e}"

    def ei_grid():
        problem = ProblemSpec(
            [VariableSpec.categorical("c", ["a", "b"]), VariableSpec.continuous("t", 0.0, 1.0)]
        )
        xs = np.array([0.05, 0.3, 0.55, 0.8, 0.95])
        pts = [MixedPoint.make([0], [t]) for t in xs]
        y = np.sin(6.0 * xs)
        model = fit(encode_points(pts, problem), y, DEFAULT_KERNELS["mlp+matern"],
                    FitConfig(restarts=3), seed=0)
        _, ei = maximize_ei_conditional(model, (0,), problem, 100, np.random.default_rng(2))
        grid = np.linspace(0.0, 1.0, 10_000)[:, None]
        cat = np.zeros((grid.shape[0], 1))
        mean, var = predict(model, (cat, grid))
        ref = float(ei_from_moments(mean, var, float(y.max())).max())
        return abs(ei - ref) <= 1e-3 and ei >= ref - 1e-3, f"search {ei:.6f} vs grid {ref:.6f}"

    def ei_nonneg():
        rng = np.random.default_rng(3)
        var = rng.exponential(size=10_000) * rng.integers(0, 2, 10_000)
        vals = ei_from_moments(rng.normal(size=10_000), var, 0.3)
        return bool(np.all(vals >= 0)), f"min {vals.min():.3e}"

    return [
        ("log-likelihood vs dense inverse/determinant", loglik_dense),
        ("conditional EI search vs 10^4-point grid", ei_grid),
        ("expected improvement nonnegative", ei_nonneg),
    ]


def _tree_checks():
    def replay():
        rng = np.random.default_rng(4)
        sizes = (3, 2, 4)
        tree = CategoryTree(sizes)
        log = []
        for _ in range(300):
            path = ucts_select(tree, 1.0, 0.2, rng)
            r = float(rng.normal())
            backpropagate(tree, path, r, Strategy.DIRICHLET)
            log.append((path, r))
        ref = oracles.replay_tree(sizes, log)
        ok = all(
            tree.nodes[p].n == n and math.isclose(tree.nodes[p].rbar, r, rel_tol=1e-12, abs_tol=1e-12)
            for p, (n, r) in ref.items()
        ) and len(ref) == len([p for p, nd in tree.nodes.items() if nd.n > 0])
        return ok, f"{len(ref)} visited nodes compared"

    def unvisited_first():
        tree = CategoryTree((3,))
        backpropagate(tree, (0,), 100.0)
        backpropagate(tree, (2,), 50.0)
        path = ucts_select(tree, 0.0, 0.0, np.random.default_rng(0))
        return path == (1,), f"selected {path}"

    def ucb_example():
        tree = CategoryTree((2,))
        for c in (0, 1, 1, 1):
            backpropagate(tree, (c,), 0.5)
        path = ucts_select(tree, 1.0, 0.0, np.random.default_rng(0))
        return path == (0,), f"selected {path}"

    return [
        ("tree state vs full-log replay", replay),
        ("unvisited child selected first", unvisited_first),
        ("UCB worked example", ucb_example),
    ]


def _selection_checks():
    def table():
        ll, acq = (2.6, 2.5, -2.1), (2.0, -1.5, 9.5)
        ok = (
            list(rank(ll)) == [3, 2, 1]
            and list(rank(acq)) == [2, 1, 3]
            and list(r_half(ll, acq)) == [4.0, 2.5, 2.5]
        )
        scores = [CandidateScore(k, l, a, 3) for k, (l, a) in enumerate(zip(ll, acq))]
        criterion_values("r_half", scores, n=10)
        winner = select_kernel(scores)
        return ok and winner == 0, f"R = {r_half(ll, acq).tolist()}, winner k{winner + 1}"

    def ties():
        r = rank([1.0, 1.0, 2.0]).tolist()
        return r == [1.5, 1.5, 3.0], f"{r}"

    def monotone():
        rng = np.random.default_rng(5)
        for _ in range(1000):
            ll, acq = rng.normal(size=5), rng.normal(size=5)
            if not np.array_equal(r_half(ll, acq), r_half(np.exp(ll), acq**3)):
                return False, "changed under monotone transform"
        return True, "1000 trials"

    return [
        ("worked example table", table),
        ("average-rank ties", ties),
        ("rank invariance under monotone transforms", monotone),
    ]


_SUITE_BUILDERS = {
    "kernels": _kernel_checks,
    "gp": _gp_checks,
    "tree": _tree_checks,
    "selection": _selection_checks,
}


def verify(suite: str = "all") -> list[CheckResult]:
    names = SUITES if suite == "all" else (suite,)
    results = []
    for name in names:
        if name not in _SUITE_BUILDERS:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
        for check_name, fn in _SUITE_BUILDERS[name]():
            try:
                ok, detail = fn()
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            results.append(CheckResult(name, check_name, bool(ok), detail))
    return results
