"""Gaussian-process surrogate: MLE fitting, prediction and expected improvement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from .kernels import (
    CholeskyError,
    KernelParams,
    KernelSpec,
    cross_cov,
    jittered_cholesky,
    prior_variance,
)

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "ell_cat": (1e-3, 10.0),
    "ell_con": (1e-3, 10.0),
    "amplitude": (1e-4, 1e4),
    "nugget": (1e-8, 1e-1),
    "mlp_var": (1e-3, 1e3),
    "mlp_bias": (1e-3, 1e3),
    "mlp_weight": (1e-3, 1e3),
}


class FitError(RuntimeError):
    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass
class FitConfig:
    restarts: int = 5
    max_iter: int = 200
    bounds: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )

    def log_bounds(self, spec: KernelSpec) -> np.ndarray:
        return np.log([self.bounds[n] for n in spec.param_names()])

    def to_dict(self) -> dict:
        return {
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "bounds": {k: list(v) for k, v in self.bounds.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        bounds = dict(DEFAULT_BOUNDS)
        for k, v in d.get("bounds", {}).items():
            if k not in bounds:
                raise ValueError(f"unknown parameter bound {k!r}")
            lo, hi = float(v[0]), float(v[1])
            if not 0 < lo < hi:
                raise ValueError(f"bound for {k} must satisfy 0 < lo < hi")
            bounds[k] = (lo, hi)
        cfg = cls(
            restarts=int(d.get("restarts", 5)),
            max_iter=int(d.get("max_iter", 200)),
            bounds=bounds,
        )
        if cfg.restarts < 1 or cfg.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")
        return cfg


@dataclass
class GPModel:
    spec: KernelSpec
    params: KernelParams
    X: tuple[np.ndarray, np.ndarray]
    y: np.ndarray  # centered
    y_mean: float
    L: np.ndarray
    alpha: np.ndarray
    log_lik: float

    @property
    def n(self) -> int:
        return len(self.y)


def _as_blocks(X) -> tuple[np.ndarray, np.ndarray]:
    xc, xn = X
    return np.atleast_2d(np.asarray(xc, dtype=float)), np.atleast_2d(
        np.asarray(xn, dtype=float)
    )


def _lml_from_factor(L: np.ndarray, alpha: np.ndarray, y: np.ndarray) -> float:
    return float(
        -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * LOG_2PI
    )


def build_model(
    spec: KernelSpec, params: KernelParams, X, y, y_mean: float | None = None
) -> GPModel:
    """Condition a GP with fixed ``params`` on data.

    ``y`` is centered here unless ``y_mean`` is given, in which case it is
    taken as already centered.  The nugget stored on the model is the one that
    actually factored.
    """
    X = _as_blocks(X)
    y = np.asarray(y, dtype=float)
    if y_mean is None:
        y_mean = float(y.mean())
        y = y - y_mean
    K = cross_cov(spec, params, X, X)
    K = 0.5 * (K + K.T)
    L, nugget = jittered_cholesky(K, params.nugget)
    if nugget != params.nugget:
        params = KernelParams(**{**params.as_dict(), "nugget": nugget})
    alpha = cho_solve((L, True), y)
    return GPModel(spec, params, X, y, y_mean, L, alpha, _lml_from_factor(L, alpha, y))


def log_marginal_likelihood(model: GPModel) -> float:
    """Log evidence of the centered targets, recomputed from the model fields."""
    K = cross_cov(model.spec, model.params, model.X, model.X)
    K = 0.5 * (K + K.T) + model.params.nugget * np.eye(model.n)
    L = np.linalg.cholesky(K)
    alpha = cho_solve((L, True), model.y)
    return _lml_from_factor(L, alpha, model.y)


def neg_lml_and_grad(
    theta: np.ndarray, spec: KernelSpec, X, y: np.ndarray, cache: dict | None = None
) -> tuple[float, np.ndarray]:
    """Negative log marginal likelihood and its gradient in log-parameters."""
    params = KernelParams.from_log(spec, theta)
    K, grads = cross_cov(spec, params, X, X, grad=True, cache=cache)
    n = len(y)
    K = 0.5 * (K + K.T) + params.nugget * np.eye(n)
    L = np.linalg.cholesky(K)
    alpha = cho_solve((L, True), y)
    lml = _lml_from_factor(L, alpha, y)
    Kinv, info = lapack.dpotri(L, lower=1)  # lower triangle of K^-1
    if info != 0:
        raise np.linalg.LinAlgError(f"dpotri failed with info {info}")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    W = np.outer(alpha, alpha) - Kinv
    g = np.empty(len(theta))
    for i, name in enumerate(spec.param_names()):
        if name == "nugget":
            g[i] = 0.5 * params.nugget * np.trace(W)
        else:
            g[i] = 0.5 * np.einsum("ij,ji->", W, grads[name])
    return -lml, -g


def _default_start(spec: KernelSpec, y: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    var = float(np.var(y)) if len(y) > 1 else 1.0
    guess = {
        "ell_cat": 1.0,
        "ell_con": 0.3,
        "amplitude": max(var, 1e-3),
        "nugget": 1e-4,
        "mlp_var": 1.0,
        "mlp_bias": 1.0,
        "mlp_weight": 1.0,
    }
    theta = np.log([guess[n] for n in spec.param_names()])
    return np.clip(theta, bounds[:, 0], bounds[:, 1])


def fit(
    X,
    Y,
    spec: KernelSpec,
    cfg: FitConfig | None = None,
    seed: int | np.random.Generator = 0,
    warm_start: KernelParams | None = None,
) -> GPModel:
    """Maximum-likelihood fit with multi-restart L-BFGS-B in log-parameter space.

    The first start is ``warm_start`` (or a data-scaled default); the others
    are uniform in the log-bounds.  The best of all starts and all local
    optima is returned, so the result is never worse than any start point.
    """
    cfg = cfg or FitConfig()
    X = _as_blocks(X)
    Y = np.asarray(Y, dtype=float)
    if len(Y) < 2 or X[0].shape[0] != len(Y) or X[1].shape[0] != len(Y):
        raise ValueError("fit needs matching X and Y with at least two samples")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y_mean = float(Y.mean())
    y = Y - y_mean
    bounds = cfg.log_bounds(spec)

    starts = [
        np.clip(warm_start.to_log(spec), bounds[:, 0], bounds[:, 1])
        if warm_start is not None
        else _default_start(spec, y, bounds)
    ]
    for _ in range(cfg.restarts - 1):
        starts.append(rng.uniform(bounds[:, 0], bounds[:, 1]))

    best_theta, best_val = None, np.inf
    failures: list[str] = []
    cache: dict = {}

    def objective(theta):
        try:
            val, g = neg_lml_and_grad(theta, spec, X, y, cache)
        except (np.linalg.LinAlgError, ArithmeticError, FloatingPointError):
            return 1e25, np.zeros_like(theta)
        if not np.isfinite(val):
            return 1e25, np.zeros_like(theta)
        return val, g

    for k, theta0 in enumerate(starts):
        v0, _ = objective(theta0)
        if v0 < best_val:
            best_theta, best_val = theta0, v0
        try:
            res = minimize(
                objective,
                theta0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": cfg.max_iter},
            )
        except (ValueError, np.linalg.LinAlgError) as exc:
            failures.append(f"restart {k}: {exc}")
            continue
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = np.clip(res.x, bounds[:, 0], bounds[:, 1]), res.fun

    if best_theta is None or best_val >= 1e25:
        raise FitError(f"all {len(starts)} restarts failed for {spec.name}", failures)
    params = KernelParams.from_log(spec, best_theta)
    try:
        return build_model(spec, params, X, y, y_mean=y_mean)
    except CholeskyError as exc:
        raise FitError(str(exc), failures) from exc


def predict(model: GPModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent-function variance at encoded points ``X``."""
    X = _as_blocks(X)
    Ks = cross_cov(model.spec, model.params, X, model.X)
    mean = model.y_mean + Ks @ model.alpha
    v = solve_triangular(model.L, Ks.T, lower=True)
    var = prior_variance(model.spec, model.params, X) - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def ei_from_moments(mean, var, y_best: float) -> np.ndarray:
    """Expected improvement over ``y_best`` for maximization."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sigma = np.sqrt(np.maximum(np.atleast_1d(np.asarray(var, dtype=float)), 0.0))
    imp = mean - y_best
    out = np.maximum(imp, 0.0)
    pos = sigma > 0
    if np.any(pos):
        # beyond |z| = 40 the density is exactly 0 in double precision
        z = np.clip(imp[pos] / sigma[pos], -40.0, 40.0)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        out = out.astype(float, copy=True)
        out[pos] = np.maximum(imp[pos] * ndtr(z) + sigma[pos] * pdf, 0.0)
    return out


def expected_improvement(model: GPModel, X, y_best: float) -> np.ndarray:
    mean, var = predict(model, X)
    return ei_from_moments(mean, var, y_best)
