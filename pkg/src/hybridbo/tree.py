"""Monte Carlo tree over the categorical variables.

Level ``i`` of the tree branches over the categories of the ``i``-th
categorical variable, so a root-to-leaf path is one categorical combination.
Nodes are created lazily and keyed by their path prefix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Strategy(str, enum.Enum):
    UCTS = "ucts"
    DIRICHLET = "dirichlet"


class RewardVariant(str, enum.Enum):
    OURS = "ours"
    ZERO_ONE = "zero-one"


@dataclass
class TreeNode:
    n: int = 0
    rbar: float = 0.0
    alpha: np.ndarray | None = None  # Dirichlet parameters over children; None at leaves


Path = tuple[int, ...]


@dataclass
class CategoryTree:
    sizes: tuple[int, ...]
    alpha0: float = 1.0
    reward_variant: RewardVariant = RewardVariant.OURS
    nodes: dict[Path, TreeNode] = field(default_factory=dict)
    decisions: int = 0  # child choices made by select calls

    def __post_init__(self):
        self.sizes = tuple(int(k) for k in self.sizes)
        if any(k < 1 for k in self.sizes):
            raise ValueError("every level needs at least one child")
        if self.alpha0 <= 0:
            raise ValueError("initial Dirichlet parameter must be positive")
        self.reward_variant = RewardVariant(self.reward_variant)

    @property
    def depth(self) -> int:
        return len(self.sizes)

    @property
    def n_leaves(self) -> int:
        return math.prod(self.sizes)

    def node(self, prefix: Path) -> TreeNode:
        """Return the node for ``prefix``, creating it when first touched."""
        node = self.nodes.get(prefix)
        if node is None:
            node = TreeNode()
            if len(prefix) < self.depth:
                node.alpha = np.full(self.sizes[len(prefix)], self.alpha0)
            self.nodes[prefix] = node
        return node

    def peek(self, prefix: Path) -> TreeNode | None:
        return self.nodes.get(prefix)

    def child_stats(self, prefix: Path) -> tuple[np.ndarray, np.ndarray]:
        """Average rewards and visit counts of the children of ``prefix``."""
        k = self.sizes[len(prefix)]
        rbar = np.zeros(k)
        n = np.zeros(k, dtype=int)
        for c in range(k):
            child = self.nodes.get(prefix + (c,))
            if child is not None:
                rbar[c], n[c] = child.rbar, child.n
        return rbar, n

    @property
    def root(self) -> TreeNode:
        return self.node(())

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "alpha0": self.alpha0,
            "reward_variant": self.reward_variant.value,
            "nodes": [
                {
                    "path": list(p),
                    "n": nd.n,
                    "rbar": nd.rbar,
                    "alpha": None if nd.alpha is None else nd.alpha.tolist(),
                }
                for p, nd in sorted(self.nodes.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CategoryTree":
        tree = cls(tuple(d["sizes"]), d.get("alpha0", 1.0), d.get("reward_variant", "ours"))
        for rec in d["nodes"]:
            alpha = None if rec["alpha"] is None else np.asarray(rec["alpha"], dtype=float)
            tree.nodes[tuple(rec["path"])] = TreeNode(rec["n"], rec["rbar"], alpha)
        return tree


def _ucb_choice(
    tree: CategoryTree, prefix: Path, c_ucb: float, rng: np.random.Generator
) -> int:
    rbar, n = tree.child_stats(prefix)
    unvisited = np.flatnonzero(n == 0)
    if unvisited.size:
        return int(unvisited[rng.integers(unvisited.size)])
    parent_n = tree.peek(prefix).n if tree.peek(prefix) else int(n.sum())
    score = rbar + c_ucb * np.sqrt(math.log(parent_n) / n)
    return int(np.argmax(score))  # first maximum wins ties


def ucts_select(
    tree: CategoryTree, c_ucb: float, epsilon: float, rng: np.random.Generator
) -> Path:
    """Descend by the upper confidence bound, with epsilon-greedy random moves."""
    path: list[int] = []
    for k in tree.sizes:
        prefix = tuple(path)
        if epsilon > 0 and rng.random() < epsilon:
            choice = int(rng.integers(k))
        else:
            choice = _ucb_choice(tree, prefix, c_ucb, rng)
        path.append(choice)
        tree.decisions += 1
    return tuple(path)


def dirichlet_select(tree: CategoryTree, rng: np.random.Generator) -> Path:
    """Descend by sampling child probabilities from each node's Dirichlet posterior."""
    path: list[int] = []
    for level, k in enumerate(tree.sizes):
        node = tree.peek(tuple(path))
        alpha = node.alpha if node is not None else np.full(k, tree.alpha0)
        p = rng.dirichlet(alpha)
        if not np.all(np.isfinite(p)) or p.sum() <= 0:
            # underflow for tiny alphas: fall back to the mean probabilities
            p = alpha / alpha.sum()
        path.append(int(rng.choice(k, p=p / p.sum())))
        tree.decisions += 1
    return tuple(path)


def make_reward_vector(
    rbar: Sequence[float], counts: Sequence[int], variant: RewardVariant | str = RewardVariant.OURS
) -> np.ndarray:
    """Reward vector over children for the Dirichlet update.

    The child with the largest average reward (lowest index on ties) is the
    winner.  ``"ours"`` gives ``(1 + winner) / count`` per child (0 for
    unvisited children); ``"zero-one"`` marks the winner only.
    """
    rbar = np.asarray(rbar, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if rbar.size == 0:
        raise ValueError("reward vector needs at least one child")
    if rbar.shape != counts.shape:
        raise ValueError("reward and count vectors differ in length")
    delta = np.zeros(rbar.size)
    visited = counts > 0
    candidates = np.where(visited, rbar, -np.inf) if visited.any() else rbar
    delta[int(np.argmax(candidates))] = 1.0
    if RewardVariant(variant) is RewardVariant.ZERO_ONE:
        return delta
    out = np.zeros(rbar.size)
    out[visited] = (1.0 + delta[visited]) / counts[visited]
    return out


def posterior_update(alpha: Sequence[float], r: Sequence[float]) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    if alpha.shape != r.shape:
        raise ValueError(f"dimension mismatch: {alpha.shape} vs {r.shape}")
    return alpha + r


def backpropagate(
    tree: CategoryTree,
    path: Path,
    reward: float,
    strategy: Strategy | str = Strategy.UCTS,
) -> None:
    """Record ``reward`` at the leaf of ``path`` and refresh every node above it."""
    path = tuple(int(s) for s in path)
    if len(path) != tree.depth or any(not 0 <= s < k for s, k in zip(path, tree.sizes)):
        raise ValueError(f"invalid path {path} for tree with sizes {tree.sizes}")

    leaf = tree.node(path)
    leaf.n += 1
    leaf.rbar += (float(reward) - leaf.rbar) / leaf.n

    for depth in range(tree.depth - 1, -1, -1):
        prefix = path[:depth]
        node = tree.node(prefix)
        node.n += 1
        rbar, n = tree.child_stats(prefix)
        node.rbar = float(rbar[n > 0].mean())

    if Strategy(strategy) is Strategy.DIRICHLET:
        for depth in range(tree.depth):
            prefix = path[:depth]
            node = tree.node(prefix)
            rbar, n = tree.child_stats(prefix)
            r = make_reward_vector(rbar, n, tree.reward_variant)
            node.alpha = posterior_update(node.alpha, r)
