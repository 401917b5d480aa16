import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rehabmcts.tree import (NodeStats, SearchParams, Tree, TreeError, UndefinedMeanError, backpropagate,
                            best_child, mean_reward, select_path, uct_value)

SQRT2 = math.sqrt(2.0)


def eq2(mean, parent_n, n_j, cp):
    """Independent scalar evaluation of the UCT formula."""
    return mean + cp * (math.log(parent_n) / n_j) ** 0.5


class TestMeanReward:
    @pytest.mark.parametrize("q,n,want", [(3, 4, 0.75), (0, 5, 0.0), (5, 5, 1.0)])
    def test_values(self, q, n, want):
        assert mean_reward(NodeStats(q, n)) == want

    def test_unvisited(self):
        with pytest.raises(UndefinedMeanError):
            mean_reward(NodeStats(0.0, 0))


class TestUCT:
    def test_unvisited_is_infinite(self):
        assert uct_value(NodeStats(0, 0), 10, SQRT2) == math.inf

    def test_cp_zero_is_mean(self):
        assert uct_value(NodeStats(3.0, 7), 50, 0.0) == 3.0 / 7

    def test_reference_value(self):
        v = uct_value(NodeStats(5.0, 10), 100, SQRT2)
        assert v == pytest.approx(eq2(0.5, 100, 10, SQRT2), rel=1e-15)
        assert v == pytest.approx(1.4597, abs=5e-5)

    @given(st.floats(0, 1), st.integers(1, 10_000), st.integers(1, 10_000))
    def test_increasing_in_parent_n(self, mean, n_j, parent_n):
        s = NodeStats(mean * n_j, n_j)
        assert uct_value(s, parent_n + 1, SQRT2) > uct_value(s, parent_n, SQRT2)

    @given(st.floats(0, 1), st.integers(1, 10_000), st.integers(3, 10_000))
    def test_decreasing_in_child_n(self, mean, n_j, parent_n):
        a = uct_value(NodeStats(mean * n_j, n_j), parent_n, SQRT2)
        b = uct_value(NodeStats(mean * (n_j + 1), n_j + 1), parent_n, SQRT2)
        assert b < a or math.isclose(a, b, rel_tol=0, abs_tol=1e-15)


def _two_child_tree(qa, na, qb, nb):
    t = Tree(SearchParams(bins=(2,)))
    t.q[1:3] = qa, qb
    t.n[1:3] = na, nb
    t.n[0] = na + nb
    t.expanded[1:3] = 1
    return t


class TestBestChild:
    def test_exploration_wins(self):
        t = _two_child_tree(0.9 * 50, 50, 0.2 * 2, 2)
        assert eq2(0.9, 52, 50, SQRT2) == pytest.approx(1.298, abs=1e-3)
        assert eq2(0.2, 52, 2, SQRT2) == pytest.approx(2.188, abs=1e-3)
        rng = np.random.default_rng(0)
        assert best_child(t.root, SQRT2, 1, rng).incoming_action == 1

    def test_greedy_wins(self):
        t = _two_child_tree(0.9 * 50, 50, 0.2 * 2, 2)
        assert best_child(t.root, 0.0, 1, np.random.default_rng(0)).incoming_action == 0

    def test_unvisited_child_first(self):
        t = _two_child_tree(0.9 * 50, 50, 0, 0)
        for s in range(20):
            assert best_child(t.root, SQRT2, 1, np.random.default_rng(s)).incoming_action == 1

    def test_below_threshold_is_uniform(self):
        t = Tree(SearchParams(bins=(4,)))
        t.n[1:5] = [5, 1, 1, 5]
        t.q[1:5] = [5, 0, 0, 5]
        t.n[0] = 12
        rng = np.random.default_rng(3)
        picks = [best_child(t.root, SQRT2, 3, rng).incoming_action for _ in range(2000)]
        assert set(picks) == {1, 2}
        assert abs(picks.count(1) - 1000) < 120

    def test_ties_are_random(self):
        t = _two_child_tree(2.0, 4, 2.0, 4)
        rng = np.random.default_rng(4)
        picks = {best_child(t.root, SQRT2, 1, rng).incoming_action for _ in range(50)}
        assert picks == {0, 1}

    def test_leaf_has_no_children(self):
        t = Tree(SearchParams(bins=(2, 2)))
        with pytest.raises(TreeError):
            best_child(t.node((0, 1)), SQRT2, 1, np.random.default_rng(0))


class TestSelectAndBackprop:
    def test_path_shape(self):
        t = Tree()
        path = select_path(t, np.random.default_rng(0))
        assert [n.level for n in path] == [0, 1, 2, 3, 4]
        assert path[-1].is_leaf
        assert all(n.expanded for n in path)

    def test_fresh_tree_is_uniform_at_root(self):
        counts = np.zeros(12)
        for s in range(1200):
            counts[select_path(Tree(), np.random.default_rng(s))[1].incoming_action] += 1
        # chi-square, 11 dof, 99.9% quantile ~ 31.3
        chi2 = ((counts - 100) ** 2 / 100).sum()
        assert chi2 < 31.3

    def test_single_simulation(self):
        t = Tree()
        path = select_path(t, np.random.default_rng(0))
        backpropagate(path, 1.0)
        assert all(n.stats == NodeStats(1.0, 1) for n in path)
        assert t.root.stats.n_visits == 1

    def test_zero_delta(self):
        t = Tree()
        path = select_path(t, np.random.default_rng(0))
        backpropagate(path, 0.0)
        assert all(n.stats == NodeStats(0.0, 1) for n in path)

    def test_delta_range(self):
        t = Tree()
        path = select_path(t, np.random.default_rng(0))
        with pytest.raises(ValueError):
            backpropagate(path, 1.5)

    def test_conservation(self):
        t = Tree()
        rng = np.random.default_rng(9)
        for k in range(1, 501):
            backpropagate(select_path(t, rng), float(rng.random()))
            assert t.root.stats.n_visits == k

    def test_greedy_full_tree_follows_max_mean(self):
        t = Tree(SearchParams(cp=0.0, bins=(3, 3)))
        rng = np.random.default_rng(0)
        # visit every leaf once with a reward pattern that peaks at (2, 1)
        for a in range(3):
            for b in range(3):
                backpropagate([t.root, t.node((a,)), t.node((a, b))], 1.0 if (a, b) == (2, 1) else 0.1 * a)
        path = select_path(t, rng)
        assert path[-1].state_id == (2, 1)

    def test_only_path_nodes_change(self):
        t = Tree()
        rng = np.random.default_rng(2)
        for _ in range(30):
            backpropagate(select_path(t, rng), 0.5)
        before_q, before_n = t.q.copy(), t.n.copy()
        path = select_path(t, rng)
        backpropagate(path, 0.7)
        changed = set(np.flatnonzero(t.n != before_n)) | set(np.flatnonzero(t.q != before_q))
        assert changed == {n.index for n in path}


class TestLayout:
    def test_index_round_trip(self):
        t = Tree()
        for bins in [(), (3,), (11, 7), (0, 0, 0, 0), (11, 7, 11, 5)]:
            assert t.path_bins(t.index_of(bins)) == bins
        assert t.size == 1 + 12 + 96 + 1152 + 6912
        assert t.n_leaves == 6912

    def test_children_sorted_and_unique(self):
        t = Tree()
        rng = np.random.default_rng(5)
        for _ in range(100):
            backpropagate(select_path(t, rng), 1.0)
        bins = [c.incoming_action for c in t.root.children]
        assert bins == sorted(set(bins))

    def test_params_validation(self):
        with pytest.raises(TreeError):
            SearchParams(cp=-1)
        with pytest.raises(TreeError):
            SearchParams(bins=(12, 1, 12, 6))


class TestSnapshot:
    def test_round_trip_lossless(self):
        t = Tree(SearchParams(rng_seed=42), k=1.5)
        rng = np.random.default_rng(42)
        for _ in range(300):
            path = select_path(t, rng)
            t.update(np.array([n.index for n in path]), float(rng.random()), float(rng.uniform(-1, 1)))
        text = t.snapshot()
        back = Tree.from_snapshot(text)
        assert back.snapshot() == text
        assert np.array_equal(back.q, t.q) and np.array_equal(back.n, t.n)
        assert np.array_equal(back.expanded, t.expanded)
        assert np.array_equal(back.prospects.num, t.prospects.num)
        assert back.params == t.params and back.prospects.k == 1.5

    def test_field_order(self):
        t = Tree()
        backpropagate(select_path(t, np.random.default_rng(0)), 1.0)
        lines = t.snapshot().splitlines()
        assert lines[0].startswith('{"format": "rehabmcts-tree", "version": 1')
        assert lines[1].startswith('{"params"')
        nodes = [line for line in lines if line.startswith('{"node"')]
        assert len(nodes) == 5 and nodes[0].startswith('{"node": []')

    def test_rejects_garbage(self):
        with pytest.raises(TreeError):
            Tree.from_snapshot('{"format": "other"}\n{}\n')
