import itertools
import math

import numpy as np
import pytest
from hypothesis import strategies as st

from nettomo.tree import LinkMetric, Orientation, RoutedTree, random_rates, random_tree


def caterpillar() -> tuple[RoutedTree, LinkMetric]:
    """s-a, a-1, a-2, s-3 with unit lengths (root of degree two)."""
    tree = RoutedTree("s", {"a": "s", "1": "a", "2": "a", "3": "s"})
    return tree, LinkMetric({e: 1.0 for e in tree.links})


def star3() -> tuple[RoutedTree, LinkMetric]:
    """s-a with leaves 1, 2, 3 all under a; unit lengths."""
    tree = RoutedTree("s", {"a": "s", "1": "a", "2": "a", "3": "a"})
    return tree, LinkMetric({e: 1.0 for e in tree.links})


def three_source_tree(orientation=Orientation.RECEIVER_ROOTED) -> RoutedTree:
    """Receiver r, internal nodes 1 and 2, sources 3, 4, 5."""
    return RoutedTree("r", {"1": "r", "2": "1", "3": "1", "4": "2", "5": "2"}, orientation)


def brute_force_moments(tree: RoutedTree, rates: dict[str, float]):
    """Exact P(X_i=1) and P(X_i X_j=1) over terminals by enumerating link states."""
    labels = tree.terminals
    links = tree.links
    m = len(labels)
    marg = np.zeros(m)
    joint = np.zeros((m, m))
    for states in itertools.product((0, 1), repeat=len(links)):
        z = dict(zip(links, states))
        prob = math.prod(rates[e] if z[e] else 1.0 - rates[e] for e in links)
        x = {tree.root: 1}
        for node in links:
            x[node] = x[tree.parent[node]] & z[node]
        v = np.array([x[lab] for lab in labels], dtype=float)
        marg += prob * v
        joint += prob * np.outer(v, v)
    return labels, marg, joint


@st.composite
def trees(draw, kind=None, min_leaves=2, max_leaves=12, orientation=Orientation.SOURCE_ROOTED):
    kind = kind or draw(st.sampled_from(["binary", "general"]))
    n = draw(st.integers(min_leaves, max_leaves))
    seed = draw(st.integers(0, 2**32 - 1))
    mc = draw(st.integers(2, 6)) if kind == "general" else 2
    root = "r" if orientation == Orientation.RECEIVER_ROOTED else "s"
    return random_tree(n, kind, mc, seed, root_label=root, orientation=orientation)


@st.composite
def trees_with_rates(draw, kind=None, min_leaves=2, max_leaves=12, low=0.5, high=0.99):
    tree = draw(trees(kind=kind, min_leaves=min_leaves, max_leaves=max_leaves))
    seed = draw(st.integers(0, 2**32 - 1))
    return tree, random_rates(tree, low, high, seed)


@pytest.fixture
def cat():
    return caterpillar()


@pytest.fixture
def star():
    return star3()


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
