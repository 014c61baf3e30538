"""Independent reference computations used to cross-check the fast paths.

Nothing in here is used by the optimizer itself.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gamma, kv

LOG_2PI = math.log(2.0 * math.pi)


def matern_bessel(r: float, ell: float, nu: float = 2.5) -> float:
    """General Matern correlation through the modified Bessel function of the second kind."""
    if r == 0:
        return 1.0
    s = math.sqrt(2.0 * nu) * r / ell
    return float((2.0 ** (1.0 - nu) / gamma(nu)) * s**nu * kv(nu, s))


def dense_log_likelihood(K: np.ndarray, y: np.ndarray) -> float:
    """Gaussian log density of ``y`` under ``N(0, K)`` via an explicit inverse and determinant."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    return float(
        -0.5 * y @ np.linalg.inv(K) @ y - 0.5 * math.log(np.linalg.det(K)) - 0.5 * n * LOG_2PI
    )


def min_eigenvalue(K: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())


def replay_tree(
    sizes: Sequence[int], log: Iterable[tuple[Sequence[int], float]]
) -> dict[tuple[int, ...], tuple[int, float]]:
    """Rebuild ``{prefix: (visits, average reward)}`` from a full reward log.

    Leaf averages are plain means of their rewards; every interior average is
    the unweighted mean of its visited children's averages.
    """
    rewards: dict[tuple[int, ...], list[float]] = defaultdict(list)
    for path, r in log:
        rewards[tuple(path)].append(float(r))
    depth = len(sizes)
    state: dict[tuple[int, ...], tuple[int, float]] = {}
    for leaf, rs in rewards.items():
        state[leaf] = (len(rs), sum(rs) / len(rs))
    for level in range(depth - 1, -1, -1):
        children: dict[tuple[int, ...], list[tuple[int, float]]] = defaultdict(list)
        for p, st in state.items():
            if len(p) == level + 1:
                children[p[:level]].append(st)
        for p, sts in children.items():
            state[p] = (sum(n for n, _ in sts), sum(r for _, r in sts) / len(sts))
    return state
