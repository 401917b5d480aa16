import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rehabmcts.prospects import ProspectLayer, estimates, propagate_horizontal, prospect_weight, signed_estimate
from rehabmcts.tree import SearchParams, Tree, backpropagate, select_path


class TestKernel:
    def test_zero_distance(self):
        for k in (0.1, 1.0, 2.0, 7.5):
            assert prospect_weight(0, k) == 1.0

    def test_reference_values(self):
        assert prospect_weight(1, 1) == 0.5
        assert prospect_weight(2, 2) == pytest.approx(1 / 25, rel=1e-15)
        assert prospect_weight(1, 2) == 0.25

    @given(st.integers(0, 200), st.floats(0.05, 10))
    def test_decreasing_in_x(self, x, k):
        assert prospect_weight(x + 1, k) < prospect_weight(x, k)

    @given(st.integers(1, 200), st.floats(0.05, 10))
    def test_decreasing_in_k(self, x, k):
        assert prospect_weight(x, k * 1.01) < prospect_weight(x, k)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            prospect_weight(-1, 2)
        with pytest.raises(ValueError):
            prospect_weight(1, 0)


@pytest.fixture
def flat_tree():
    return Tree(SearchParams(bins=(8,)))


class TestPropagate:
    def test_single_update_values(self, flat_tree, backend):
        layer = ProspectLayer(flat_tree, 1)
        flat_tree.expanded[1 + 3] = 1
        propagate_horizontal(layer, 3, 1.0)
        vals = layer.values
        assert vals.mask[3]
        # one update leaves delta * P_x in each prospect
        expect = {x: 1.0 / (x * x + 1) ** 2 for x in range(1, 5)}
        for b in range(8):
            if b != 3:
                assert vals[b] == pytest.approx(expect[abs(b - 3)], rel=1e-15)
        assert vals[2] == 0.25 and vals[5] == pytest.approx(0.04)

    def test_visited_bins_untouched(self, flat_tree, backend):
        backpropagate([flat_tree.root, flat_tree.node((4,))], 0.8)
        q, n = flat_tree.q.copy(), flat_tree.n.copy()
        propagate_horizontal(ProspectLayer(flat_tree, 1), 3, -1.0)
        assert np.array_equal(q, flat_tree.q) and np.array_equal(n, flat_tree.n)
        assert flat_tree.prospects.weight[1 + 4] == 0.0

    def test_larger_k_is_more_local(self, backend):
        vals = {}
        for k in (1.0, 2.0, 4.0):
            t = Tree(SearchParams(bins=(8,)), k=k)
            t.expanded[1] = 1
            propagate_horizontal(ProspectLayer(t, 1), 0, 1.0)
            vals[k] = t.prospects.values()[2:9]
        assert np.all(vals[2.0] < vals[1.0]) and np.all(vals[4.0] < vals[2.0])

    def test_siblings_only(self, backend):
        t = Tree(SearchParams(bins=(3, 4)))
        layer = ProspectLayer(t, 2)
        propagate_horizontal(layer, 5, 1.0)  # parent 1, bin 1
        vals = t.prospects.values()[t.offsets[2]:t.offsets[3]]
        assert np.all(vals[:4] == 0) and np.all(vals[8:] == 0)
        assert np.all(vals[[4, 6, 7]] > 0)
        assert np.all(t.prospects.values()[:t.offsets[2]] == 0)

    def test_no_wrap(self, flat_tree, backend):
        propagate_horizontal(ProspectLayer(flat_tree, 1), 0, 1.0)
        v = flat_tree.prospects.values()[1:9]
        assert v[7] == pytest.approx(1 / 50 ** 2)

    def test_running_mean_of_two(self, flat_tree, backend):
        layer = ProspectLayer(flat_tree, 1)
        propagate_horizontal(layer, 0, 1.0)
        propagate_horizontal(layer, 2, -1.0)
        # bin 1 sees +0.25 then -0.25 with equal weights
        assert flat_tree.prospects.value(2) == pytest.approx(0.0, abs=1e-16)
        # bin 3: +0.01 (w .01) then -0.25 (w .25)
        want = (0.01 * 0.01 - 0.25 * 0.25) / (0.01 + 0.25)
        assert flat_tree.prospects.value(4) == pytest.approx(want, rel=1e-14)

    def test_delta_range(self, flat_tree):
        with pytest.raises(ValueError):
            propagate_horizontal(ProspectLayer(flat_tree, 1), 0, 1.5)
        with pytest.raises(IndexError):
            propagate_horizontal(ProspectLayer(flat_tree, 1), 8, 0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 11), st.floats(-1, 1)), min_size=1, max_size=60),
           st.floats(0.1, 6))
    def test_bounded(self, updates, k):
        t = Tree(SearchParams(bins=(12,)), k=k)
        layer = ProspectLayer(t, 1)
        for b, d in updates:
            propagate_horizontal(layer, b, d)
        v = t.prospects.values()
        assert np.all(v >= -1.0) and np.all(v <= 1.0)


class TestSignedEstimate:
    def test_cases(self, flat_tree):
        t = flat_tree
        t.q[1], t.n[1] = 4.0, 4
        t.q[2], t.n[2] = 0.0, 3
        t.q[3], t.n[3] = 1.5, 2
        assert signed_estimate(t, 1) == 1.0
        assert signed_estimate(t, 2) == -1.0
        assert signed_estimate(t, 3) == 0.5
        assert signed_estimate(t, 4) == 0.0
        np.testing.assert_array_equal(estimates(t)[1:5], [1.0, -1.0, 0.5, 0.0])

    def test_promotion_discards_prospect(self, backend):
        t = Tree(SearchParams(bins=(4, 4)))
        rng = np.random.default_rng(0)
        path = np.array([n.index for n in select_path(t, rng)])
        t.update(path, 1.0, 1.0)
        assert t.prospects.weight[path].sum() == 0
        sib = [i for i in range(t.offsets[1], t.offsets[2]) if i != path[1]][0]
        assert t.prospects.weight[sib] > 0
        t.update(np.array([0, sib, t.index_of((sib - 1, 0))]), 0.0, -1.0)
        assert t.prospects.weight[sib] == 0 and signed_estimate(t, sib) == pytest.approx(-1.0)

    def test_vectorised_matches_scalar(self, backend):
        t = Tree()
        rng = np.random.default_rng(11)
        for _ in range(200):
            path = np.array([n.index for n in select_path(t, rng)])
            s = float(rng.uniform(-1, 1))
            t.update(path, (s + 1) / 2, s)
        est = estimates(t)
        for i in rng.integers(1, t.size, 500):
            assert est[i] == signed_estimate(t, int(i))
