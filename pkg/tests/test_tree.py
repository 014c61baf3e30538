import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridbo import oracles
from hybridbo.tree import (
    CategoryTree,
    RewardVariant,
    Strategy,
    backpropagate,
    dirichlet_select,
    make_reward_vector,
    posterior_update,
    ucts_select,
)

UCB_VISITED_ONCE = 1.67741002251547469  # 0.5 + sqrt(ln 4 / 1)
UCB_VISITED_THRICE = 1.17977799344587265  # 0.5 + sqrt(ln 4 / 3)


def feed(tree, items, strategy=Strategy.UCTS):
    for path, r in items:
        backpropagate(tree, path, r, strategy)


class TestUcts:
    def test_worked_example(self):
        tree = CategoryTree((2,))
        feed(tree, [((0,), 0.5), ((1,), 0.5), ((1,), 0.5), ((1,), 0.5)])
        rbar, n = tree.child_stats(())
        scores = rbar + math.sqrt(2.0) / math.sqrt(2.0) * np.sqrt(np.log(tree.root.n) / n)
        np.testing.assert_allclose(scores, [UCB_VISITED_ONCE, UCB_VISITED_THRICE], rtol=1e-14)
        assert ucts_select(tree, 1.0, 0.0, np.random.default_rng(0)) == (0,)

    def test_unvisited_child_first(self):
        tree = CategoryTree((3,))
        feed(tree, [((0,), 100.0), ((2,), 50.0)])
        for seed in range(10):
            assert ucts_select(tree, 0.0, 0.0, np.random.default_rng(seed)) == (1,)

    def test_unvisited_children_drawn_uniformly(self):
        tree = CategoryTree((4,))
        feed(tree, [((0,), 1.0)])
        rng = np.random.default_rng(0)
        picks = [ucts_select(tree, 1.0, 0.0, rng)[0] for _ in range(3000)]
        counts = np.bincount(picks, minlength=4)
        assert counts[0] == 0
        assert np.all(np.abs(counts[1:] - 1000) < 4 * math.sqrt(3000 * (1 / 3) * (2 / 3)))

    def test_zero_exploration_is_argmax_lowest_index(self):
        tree = CategoryTree((3,))
        feed(tree, [((0,), 1.0), ((1,), 3.0), ((2,), 3.0), ((0,), 1.0)])
        assert ucts_select(tree, 0.0, 0.0, np.random.default_rng(0)) == (1,)

    def test_full_greedy_probability(self):
        tree = CategoryTree((2,))
        feed(tree, [((0,), 1.0), ((1,), 0.0)])
        rng = np.random.default_rng(7)
        picks = np.array([ucts_select(tree, 0.0, 0.3, rng)[0] for _ in range(10_000)])
        # random move picks child 1 half the time
        assert abs(picks.mean() - 0.15) < 4 * math.sqrt(0.15 * 0.85 / 10_000)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        items = [((int(rng.integers(3)), int(rng.integers(2))), float(rng.normal())) for _ in range(30)]
        a, b = CategoryTree((3, 2)), CategoryTree((3, 2))
        feed(a, items)
        feed(b, [(p, r + 17.0) for p, r in items])
        pa = [ucts_select(a, 1.0, 0.1, np.random.default_rng(s)) for s in range(20)]
        pb = [ucts_select(b, 1.0, 0.1, np.random.default_rng(s)) for s in range(20)]
        assert pa == pb

    def test_decisions_count_levels(self):
        tree = CategoryTree((3, 5, 2, 4))
        rng = np.random.default_rng(0)
        for i in range(1, 11):
            path = ucts_select(tree, 1.0, 0.1, rng)
            assert tree.decisions == 4 * i
            backpropagate(tree, path, 0.0)

    def test_deterministic(self):
        def go():
            tree, rng = CategoryTree((3, 3)), np.random.default_rng(5)
            out = []
            for _ in range(30):
                p = ucts_select(tree, 1.0, 0.2, rng)
                backpropagate(tree, p, float(sum(p)))
                out.append(p)
            return out

        assert go() == go()


class TestDirichlet:
    def test_degenerate_alpha(self):
        tree = CategoryTree((2,))
        tree.root.alpha = np.array([1e6, 1e-6])
        rng = np.random.default_rng(0)
        picks = np.array([dirichlet_select(tree, rng)[0] for _ in range(10_000)])
        assert (picks == 0).mean() > 0.999

    def test_marginal_frequencies(self):
        tree = CategoryTree((3,))
        alpha = np.array([1.0, 2.0, 5.0])
        tree.root.alpha = alpha.copy()
        rng = np.random.default_rng(1)
        n = 10_000
        counts = np.bincount([dirichlet_select(tree, rng)[0] for _ in range(n)], minlength=3)
        p = alpha / alpha.sum()
        assert np.all(np.abs(counts / n - p) < 3 * np.sqrt(p * (1 - p) / n))

    def test_deterministic(self):
        tree = CategoryTree((3, 4))
        a = [dirichlet_select(tree, np.random.default_rng(s)) for s in range(20)]
        b = [dirichlet_select(tree, np.random.default_rng(s)) for s in range(20)]
        assert a == b

    def test_decisions(self):
        tree = CategoryTree((2, 3, 4))
        dirichlet_select(tree, np.random.default_rng(0))
        assert tree.decisions == 3


class TestRewardVector:
    def test_ours(self):
        np.testing.assert_allclose(make_reward_vector([0.9, 0.4], [1, 2]), [2.0, 0.5])

    def test_zero_one(self):
        np.testing.assert_array_equal(
            make_reward_vector([0.9, 0.4], [1, 2], RewardVariant.ZERO_ONE), [1.0, 0.0]
        )

    def test_tie_goes_to_lowest_index(self):
        np.testing.assert_allclose(make_reward_vector([0.5, 0.5, 0.5], [1, 1, 1]), [2.0, 1.0, 1.0])

    def test_unvisited_child_gets_nothing(self):
        np.testing.assert_allclose(make_reward_vector([0.0, -1.0, 0.0], [0, 2, 0]), [0.0, 1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            make_reward_vector([1.0, 2.0], [1])
        with pytest.raises(ValueError):
            make_reward_vector([], [])

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.floats(-10, 10), st.integers(1, 20)), min_size=1, max_size=6))
    def test_positive_for_visited(self, pairs):
        rbar, n = zip(*pairs)
        r = make_reward_vector(rbar, n)
        assert np.all(r > 0)
        assert np.count_nonzero(r * np.asarray(n) > 1 + 1e-12) == 1

    def test_posterior_update(self):
        np.testing.assert_allclose(posterior_update([1.0, 1.0], [2.0, 0.5]), [3.0, 1.5])

    def test_posterior_dimension_mismatch(self):
        with pytest.raises(ValueError):
            posterior_update([1.0, 1.0], [1.0])


class TestBackpropagate:
    def test_leaf_running_mean_and_counts(self):
        tree = CategoryTree((2, 2))
        feed(tree, [((0, 1), 1.0), ((0, 1), 3.0), ((1, 0), -2.0)])
        assert tree.nodes[(0, 1)].n == 2 and tree.nodes[(0, 1)].rbar == 2.0
        assert tree.nodes[(0,)].rbar == 2.0
        assert tree.root.n == 3
        assert tree.root.rbar == 0.0  # mean of child averages 2 and -2

    def test_interior_mean_is_unweighted(self):
        tree = CategoryTree((2, 2))
        feed(tree, [((0, 0), 1.0), ((0, 0), 1.0), ((0, 0), 1.0), ((0, 1), 5.0)])
        assert tree.nodes[(0,)].rbar == 3.0

    def test_dirichlet_updates_every_level(self):
        tree = CategoryTree((2, 2))
        feed(tree, [((0, 1), 1.0)], Strategy.DIRICHLET)
        np.testing.assert_allclose(tree.root.alpha, [3.0, 1.0])
        np.testing.assert_allclose(tree.nodes[(0,)].alpha, [1.0, 3.0])
        assert tree.peek((1,)) is None

    def test_ucts_leaves_alpha_untouched(self):
        tree = CategoryTree((2,))
        feed(tree, [((0,), 1.0)])
        np.testing.assert_array_equal(tree.root.alpha, [1.0, 1.0])

    def test_invalid_path(self):
        tree = CategoryTree((2, 2))
        with pytest.raises(ValueError):
            backpropagate(tree, (0, 2), 1.0)
        with pytest.raises(ValueError):
            backpropagate(tree, (0,), 1.0)

    @pytest.mark.parametrize("strategy", list(Strategy))
    def test_replay_oracle(self, strategy):
        sizes = (3, 2, 4)
        rng = np.random.default_rng(11)
        tree, log = CategoryTree(sizes), []
        for _ in range(500):
            path = tuple(int(rng.integers(k)) for k in sizes)
            r = float(rng.normal())
            backpropagate(tree, path, r, strategy)
            log.append((path, r))
        ref = oracles.replay_tree(sizes, log)
        for prefix, (n, rbar) in ref.items():
            assert tree.nodes[prefix].n == n
            assert tree.nodes[prefix].rbar == pytest.approx(rbar, rel=1e-12, abs=1e-12)

    def test_visit_conservation(self):
        sizes = (2, 3, 2)
        tree, rng = CategoryTree(sizes), np.random.default_rng(2)
        for t in range(1, 101):
            path = ucts_select(tree, 1.0, 0.1, rng)
            backpropagate(tree, path, float(rng.random()))
            assert tree.root.n == t
            for prefix, node in tree.nodes.items():
                if len(prefix) < tree.depth and node.n:
                    _, n = tree.child_stats(prefix)
                    assert n.sum() == node.n

    def test_round_trip(self):
        tree = CategoryTree((2, 3), alpha0=0.5)
        feed(tree, [((1, 2), 0.3), ((0, 0), 1.0)], Strategy.DIRICHLET)
        again = CategoryTree.from_dict(tree.to_dict())
        assert again.to_dict() == tree.to_dict()


def test_bad_construction():
    with pytest.raises(ValueError):
        CategoryTree((2, 0))
    with pytest.raises(ValueError):
        CategoryTree((2,), alpha0=0.0)
