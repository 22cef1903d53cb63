import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import three_source_tree, trees_with_rates
from nettomo.errors import MetricIncomplete
from nettomo.simulate import (
    SampleSet,
    derive_seed,
    propagate,
    read_samples_csv,
    simulate,
    simulate_multicast,
    simulate_reverse_multicast,
    write_samples_csv,
)
from nettomo.tree import LinkMetric, Orientation, RoutedTree, random_rates, random_tree


def two_leaf():
    return RoutedTree("s", {"a": "s", "1": "a", "2": "a"})


def test_lossless_is_all_ones():
    t = random_tree(6, "general", 4, 2)
    s = simulate_multicast(t, {e: 1.0 for e in t.links}, 50, 1)
    assert s.outcomes.all()
    r = simulate_reverse_multicast(t.mirror(), {e: 1.0 for e in t.links}, 50, 1)
    assert r.outcomes.all()


def test_dead_root_link_kills_everything():
    t = random_tree(5, "binary", 2, 3)
    rates = {e: 0.9 for e in t.links}
    rates[t.children(t.root)[0]] = 0.0
    s = simulate_multicast(t, rates, 200, 0)
    assert not s.outcomes[:, 1:].any()
    assert s.outcomes[:, 0].all()


def test_two_leaf_marginal():
    s = simulate_multicast(two_leaf(), LinkMetric.from_rates({e: 0.9 for e in "a12"}), 100_000, 11)
    for lab in ("1", "2"):
        assert abs(s.column(lab).mean() - 0.81) < 0.005


def test_reverse_three_hop_marginal():
    t = three_source_tree()
    s = simulate_reverse_multicast(t, {e: 0.9 for e in t.links}, 100_000, 12)
    assert s.labels == ("r", "3", "4", "5")
    assert abs(s.column("4").mean() - 0.729) < 0.006


def test_joint_frequency_matches_product():
    t = random_tree(4, "binary", 2, 8)
    m = random_rates(t, 0.7, 0.95, 8)
    s = simulate(t, m, 100_000, 9)
    rates = m.success_rates()
    for i, j in [("1", "2"), ("1", "3"), ("2", "4")]:
        path = set(t.ancestors(i)[:-1]) | set(t.ancestors(j)[:-1])
        p = np.prod([rates[e] for e in path])
        est = (s.column(i) & s.column(j)).mean()
        assert abs(est - p) < 4 * np.sqrt(p * (1 - p) / s.n)


def test_orientation_checked():
    t = two_leaf()
    with pytest.raises(ValueError):
        simulate_reverse_multicast(t, {e: 0.9 for e in t.links}, 5, 0)
    with pytest.raises(ValueError):
        simulate_multicast(t.mirror(), {e: 0.9 for e in t.links}, 5, 0)


def test_missing_rate_and_bad_n():
    t = two_leaf()
    with pytest.raises(MetricIncomplete):
        simulate(t, {"a": 0.9}, 5, 0)
    with pytest.raises(ValueError):
        simulate(t, {e: 0.9 for e in t.links}, 0, 0)


@settings(max_examples=40, deadline=None)
@given(trees_with_rates(max_leaves=10), st.integers(0, 2**63 - 1))
def test_reverse_equals_forward_on_mirror(tm, seed):
    tree, metric = tm
    fwd = simulate_multicast(tree, metric, 300, seed)
    rev = simulate_reverse_multicast(tree.mirror(), metric, 300, seed)
    assert fwd == rev


@settings(max_examples=40, deadline=None)
@given(trees_with_rates(max_leaves=10), st.integers(0, 2**32))
def test_monotone_along_paths(tm, seed):
    tree, metric = tm
    X = propagate(tree, np.array([metric.success_rates()[e] for e in tree.links]), 200, np.random.default_rng(seed))
    for node in tree.links:
        assert np.all(X[node] <= X[tree.parent[node]])


def test_deterministic():
    t = random_tree(8, "general", 4, 1)
    m = random_rates(t, 0.8, 0.99, 1)
    assert simulate(t, m, 500, 42) == simulate(t, m, 500, 42)
    assert simulate(t, m, 500, 42) != simulate(t, m, 500, 43)


def test_sampleset_validation():
    with pytest.raises(ValueError):
        SampleSet(("s", "1"), np.array([[0, 1]]))
    with pytest.raises(ValueError):
        SampleSet(("s", "1"), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        SampleSet(("s", "1"), np.array([[1, 2]]))


def test_csv_round_trip(tmp_path):
    t = random_tree(5, "binary", 2, 1)
    s = simulate(t, random_rates(t, 0.8, 0.99, 1), 64, 3)
    write_samples_csv(s, tmp_path / "s.csv")
    assert read_samples_csv(tmp_path / "s.csv") == s


def test_derive_seed_properties():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    seeds = {derive_seed(7, t, k) for t in range(50) for k in range(8)}
    assert len(seeds) == 400
    assert all(0 <= x < 2**64 for x in seeds)
    assert derive_seed(1, 2) != derive_seed(2, 1)
