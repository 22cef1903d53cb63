import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import trees, trees_with_rates
from nettomo.errors import InvalidTree, LabelMismatch, MetricIncomplete, NodeNotFound, TooFewLeaves
from nettomo.tree import (
    DistanceMatrix,
    LinkMetric,
    Orientation,
    RoutedTree,
    canonical_form,
    contract_links,
    four_point_violation,
    link_matching,
    nearest_common_ancestor,
    nearest_common_descendant,
    path_distance,
    random_rates,
    random_tree,
    root_distances,
    terminal_distance_matrix,
    trees_equal,
)


def seven_node_tree():
    # reconstruction consistent with nca(4,5)=2 and nca(4,6)=1
    return RoutedTree("s", {"1": "s", "2": "1", "3": "1", "4": "2", "5": "2", "6": "3", "7": "3"})


class TestRoutedTree:
    def test_structure(self, cat):
        tree, _ = cat
        assert tree.leaves == ("1", "2", "3")
        assert tree.terminals == ("s", "1", "2", "3")
        assert tree.internal_nodes() == ("a",)
        assert set(tree.links) == {"a", "1", "2", "3"}
        assert tree.cluster("a") == {"1", "2"}
        assert tree.ancestors("1") == ["1", "a", "s"]

    def test_rejects_unary_internal_node(self):
        with pytest.raises(InvalidTree):
            RoutedTree("s", {"a": "s", "b": "a", "1": "b", "2": "b"})

    def test_rejects_cycle_and_dangling(self):
        with pytest.raises(InvalidTree):
            RoutedTree("s", {"a": "b", "b": "a", "1": "s"})
        with pytest.raises(InvalidTree):
            RoutedTree("s", {"1": "x"})

    def test_unknown_node(self, cat):
        with pytest.raises(NodeNotFound):
            cat[0].children("zz")

    def test_mirror_flips_orientation_only(self, cat):
        tree, _ = cat
        m = tree.mirror()
        assert m.orientation == Orientation.RECEIVER_ROOTED
        assert dict(m.parent) == dict(tree.parent)
        assert m.mirror().orientation == Orientation.SOURCE_ROOTED


class TestLinkMetric:
    def test_rates_and_lengths_agree(self):
        m = LinkMetric.from_rates({"a": 0.9})
        assert m.lengths["a"] == -math.log(0.9)
        assert m.success_rates()["a"] == 0.9

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_lengths_positive_finite(self, bad):
        with pytest.raises(ValueError):
            LinkMetric({"a": bad})

    def test_mismatched_rate(self):
        with pytest.raises(ValueError):
            LinkMetric({"a": 0.1}, {"a": 0.5})


class TestDistanceMatrix:
    def test_validation(self):
        with pytest.raises(ValueError):
            DistanceMatrix(("a", "b"), [[0, 1], [2, 0]])
        with pytest.raises(ValueError):
            DistanceMatrix(("a", "b"), [[1, 1], [1, 0]])
        with pytest.raises(ValueError):
            DistanceMatrix(("a", "b"), [[0, -1], [-1, 0]])

    def test_lookup_and_reorder(self):
        d = DistanceMatrix(("a", "b", "c"), [[0, 1, 2], [1, 0, 3], [2, 3, 0]])
        assert d["c", "b"] == 3
        r = d.reordered(("c", "a", "b"))
        assert r["a", "c"] == 2 and r.labels == ("c", "a", "b")
        with pytest.raises(LabelMismatch):
            d["a", "z"]


class TestPathDistance:
    def test_identity(self, cat):
        assert path_distance(*cat, "1", "1") == 0.0

    def test_caterpillar(self, cat):
        assert path_distance(*cat, "1", "3") == 3.0

    def test_missing_length(self, cat):
        tree, _ = cat
        with pytest.raises(MetricIncomplete):
            path_distance(tree, LinkMetric({"1": 1.0}), "1", "3")

    def test_unknown_node(self, cat):
        with pytest.raises(NodeNotFound):
            path_distance(*cat, "1", "q")

    @settings(max_examples=100, deadline=None)
    @given(trees_with_rates(), st.data())
    def test_symmetric(self, tm, data):
        tree, metric = tm
        i = data.draw(st.sampled_from(tree.preorder()))
        j = data.draw(st.sampled_from(tree.preorder()))
        assert path_distance(tree, metric, i, j) == path_distance(tree, metric, j, i)


class TestNearestCommonAncestor:
    def test_small_tree_examples(self):
        t = seven_node_tree()
        assert nearest_common_ancestor(t, "4", "5") == "2"
        assert nearest_common_ancestor(t, "4", "6") == "1"
        assert nearest_common_ancestor(t, "4", "4") == "4"

    def test_reverse_tree_examples(self):
        from conftest import three_source_tree

        t = three_source_tree()
        assert nearest_common_descendant(t, "4", "5") == "2"
        assert nearest_common_descendant(t, "3", "4") == "1"

    def test_unknown(self):
        with pytest.raises(NodeNotFound):
            nearest_common_ancestor(seven_node_tree(), "4", "99")


class TestTerminalDistances:
    def test_two_leaf(self):
        t = RoutedTree("s", {"a": "s", "1": "a", "2": "a"})
        d = terminal_distance_matrix(t, LinkMetric({e: 1.0 for e in t.links}))
        assert d["s", "1"] == d["s", "2"] == 2.0
        assert d["1", "2"] == 2.0

    def test_single_leaf_chain(self):
        t = RoutedTree("s", {"1": "s"})
        d = terminal_distance_matrix(t, LinkMetric({"1": 0.7}))
        assert d.values.tolist() == [[0.0, 0.7], [0.7, 0.0]]

    def test_caterpillar(self, cat):
        d = terminal_distance_matrix(*cat)
        assert d["1", "3"] == 3.0 and d["1", "2"] == 2.0 and d["s", "3"] == 1.0

    @settings(max_examples=60, deadline=None)
    @given(trees_with_rates(max_leaves=9))
    def test_matches_path_distance_and_four_point(self, tm):
        tree, metric = tm
        d = terminal_distance_matrix(tree, metric)
        for i in d.labels:
            for j in d.labels:
                assert d[i, j] == pytest.approx(path_distance(tree, metric, i, j), abs=1e-12)
        assert four_point_violation(d) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(trees_with_rates(min_leaves=2, max_leaves=12))
    def test_rho_identity(self, tm):
        tree, metric = tm
        d = terminal_distance_matrix(tree, metric)
        rd = root_distances(tree, metric)
        s = tree.root
        for i in tree.leaves:
            for j in tree.leaves:
                lhs = d[s, i] + d[s, j] - d[i, j]
                assert lhs == pytest.approx(2 * rd[nearest_common_ancestor(tree, i, j)], abs=1e-12)

    def test_four_point_detects_non_tree_metric(self):
        # a 4-cycle metric with unequal diagonals is not a tree metric
        v = np.array([[0, 1, 2, 1], [1, 0, 1, 3], [2, 1, 0, 1], [1, 3, 1, 0]], dtype=float)
        assert four_point_violation(DistanceMatrix(tuple("abcd"), v)) > 0.5


class TestRandomTree:
    def test_two_leaves_unique(self):
        for seed in range(5):
            t = random_tree(2, "binary", 2, seed)
            assert canonical_form(t) == ("s", (("1", "2"),))

    def test_deterministic(self):
        a = random_tree(10, "binary", 2, 7)
        b = random_tree(10, "binary", 2, 7)
        assert dict(a.parent) == dict(b.parent)

    def test_too_few(self):
        with pytest.raises(TooFewLeaves):
            random_tree(1)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2**32 - 1))
    def test_binary_shape(self, n, seed):
        t = random_tree(n, "binary", 2, seed)
        assert len(t.leaves) == n
        assert len(t.children(t.root)) == 1
        assert all(len(t.children(v)) == 2 for v in t.internal_nodes())

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 30), st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_general_degree_bounds(self, n, mc, seed):
        t = random_tree(n, "general", mc, seed)
        assert len(t.leaves) == n
        assert all(2 <= len(t.children(v)) <= mc for v in t.internal_nodes())

    def test_general_trees_vary(self):
        degrees = {len(random_tree(12, "general", 5, s).internal_nodes()) for s in range(30)}
        assert len(degrees) > 3

    def test_random_rates_range(self):
        t = random_tree(8, "binary", 2, 1)
        m = random_rates(t, 0.9, 0.99, 3)
        r = m.success_rates()
        assert set(r) == set(t.links)
        assert all(0.9 <= v <= 0.99 for v in r.values())


class TestTreesEqual:
    def test_reflexive(self, cat):
        assert trees_equal(cat[0], cat[0])

    def test_distinct_cherries(self):
        a = RoutedTree("s", {"x": "s", "y": "x", "3": "x", "1": "y", "2": "y"})
        b = RoutedTree("s", {"x": "s", "y": "x", "2": "x", "1": "y", "3": "y"})
        assert not trees_equal(a, b)

    def test_ids_and_insertion_order_ignored(self):
        a = RoutedTree("s", {"x": "s", "y": "x", "3": "x", "1": "y", "2": "y"})
        b = RoutedTree("s", {"2": "q", "1": "q", "q": "p", "3": "p", "p": "s"})
        assert trees_equal(a, b)
        assert link_matching(a, b) == {"x": "p", "y": "q", "1": "1", "2": "2", "3": "3"}

    def test_label_mismatch(self, cat):
        other = RoutedTree("s", {"a": "s", "1": "a", "9": "a"})
        with pytest.raises(LabelMismatch):
            trees_equal(cat[0], other)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 8), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
    def test_equivalence_relation(self, n, s1, s2, s3):
        a, b, c = (random_tree(n, "general", 4, s) for s in (s1, s2, s3))
        assert trees_equal(a, a)
        assert trees_equal(a, b) == trees_equal(b, a)
        if trees_equal(a, b) and trees_equal(b, c):
            assert trees_equal(a, c)

    def test_contract_links(self):
        t = RoutedTree("s", {"x": "s", "y": "x", "3": "x", "1": "y", "2": "y"})
        star = contract_links(t, ["y"])
        assert set(star.children("x")) == {"1", "2", "3"}
        with pytest.raises(InvalidTree):
            contract_links(t, ["1"])
