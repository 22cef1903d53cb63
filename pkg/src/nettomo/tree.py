"""Logical routing trees, link metrics and terminal distance matrices.

Node ids are strings. Terminal nodes (the root and the leaves) use their
external label as node id; internal nodes carry synthetic ids that are never
observed by measurements. A link is identified by its endpoint farther from
the root, so ``metric.lengths[k]`` is the length of the link above ``k``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    InvalidTree,
    LabelMismatch,
    MetricIncomplete,
    NodeNotFound,
    TooFewLeaves,
)


class Orientation(str, enum.Enum):
    SOURCE_ROOTED = "source_rooted"
    RECEIVER_ROOTED = "receiver_rooted"


def label_key(label: str):
    """Sort key putting numeric labels in numeric order ("2" < "10")."""
    parts = re.split(r"(\d+)", label)
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in parts if p)


@dataclass(frozen=True, eq=False)
class RoutedTree:
    """Rooted logical tree given by a child -> parent map.

    The root has at least one child and every other internal node has at
    least two, so internal nodes have degree >= 3. Trees produced by
    :func:`random_tree` and by the inference algorithms have a root of
    degree one, as in a logical routing tree.

    ``orientation`` only records the direction probes travel; the structure
    is always stored rooted at the constant terminal (source ``s`` or
    receiver ``r``).
    """

    root: str
    parent: Mapping[str, str]
    orientation: Orientation = Orientation.SOURCE_ROOTED
    _children: Mapping[str, tuple[str, ...]] = field(init=False, repr=False)
    _order: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        parent = dict(self.parent)
        object.__setattr__(self, "parent", MappingProxyType(parent))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.root in parent:
            raise InvalidTree(f"root {self.root!r} has a parent")
        children: dict[str, list[str]] = {self.root: []}
        for c in parent:
            children.setdefault(c, [])
        for c, p in parent.items():
            if p not in children:
                raise InvalidTree(f"parent {p!r} of {c!r} is not a node")
            children[p].append(c)
        order = list(self._preorder(self.root, children))
        if len(order) != len(children):
            raise InvalidTree("tree is not connected (cycle or detached nodes)")
        if not children[self.root]:
            raise InvalidTree("root has no children")
        for node, kids in children.items():
            if node != self.root and len(kids) == 1:
                raise InvalidTree(f"internal node {node!r} has a single child")
        object.__setattr__(
            self, "_children", MappingProxyType({k: tuple(v) for k, v in children.items()})
        )
        object.__setattr__(self, "_order", tuple(order))

    @staticmethod
    def _preorder(root, children):
        stack = [root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(children[node]))

    # -- structure -------------------------------------------------------

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._order)

    def __contains__(self, node) -> bool:
        return node in self._children

    def children(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return self._children[node]

    def preorder(self) -> tuple[str, ...]:
        return self._order

    @property
    def links(self) -> tuple[str, ...]:
        """Link ids (non-root nodes) in preorder."""
        return self._order[1:]

    @property
    def leaves(self) -> tuple[str, ...]:
        return tuple(sorted((n for n in self._order[1:] if not self._children[n]), key=label_key))

    @property
    def leaf_labels(self) -> dict[str, str]:
        return {leaf: leaf for leaf in self.leaves}

    @property
    def terminals(self) -> tuple[str, ...]:
        """The root followed by the leaves in label order."""
        return (self.root,) + self.leaves

    def internal_nodes(self) -> tuple[str, ...]:
        return tuple(n for n in self._order[1:] if self._children[n])

    def is_leaf(self, node: str) -> bool:
        return node != self.root and not self.children(node)

    def ancestors(self, node: str) -> list[str]:
        """Path from ``node`` up to the root, both included."""
        self._check(node)
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path

    def cluster(self, node: str) -> frozenset[str]:
        """Leaves below ``node`` (a leaf is its own cluster)."""
        self._check(node)
        out = []
        stack = [node]
        while stack:
            n = stack.pop()
            kids = self._children[n]
            if kids:
                stack.extend(kids)
            elif n != self.root:
                out.append(n)
        return frozenset(out)

    def clusters(self) -> dict[str, frozenset[str]]:
        """Cluster of every node, computed bottom-up in one pass."""
        out: dict[str, frozenset[str]] = {}
        for node in reversed(self._order):
            kids = self._children[node]
            out[node] = frozenset().union(*(out[k] for k in kids)) if kids else frozenset([node])
        return out

    def mirror(self) -> RoutedTree:
        flipped = (
            Orientation.RECEIVER_ROOTED
            if self.orientation == Orientation.SOURCE_ROOTED
            else Orientation.SOURCE_ROOTED
        )
        return RoutedTree(self.root, self.parent, flipped)

    def _check(self, node):
        if node not in self._children:
            raise NodeNotFound(node)

    def __repr__(self):
        return f"RoutedTree({to_newick_text(self)!r}, {self.orientation.value})"


@dataclass(frozen=True)
class LinkMetric:
    """Positive per-link lengths, optionally paired with success rates.

    When both are present ``lengths[e] == -log(rates[e])``.
    """

    lengths: Mapping[str, float]
    rates: Mapping[str, float] | None = None

    def __post_init__(self):
        lengths = {k: float(v) for k, v in self.lengths.items()}
        for k, v in lengths.items():
            if not (0.0 < v < math.inf):
                raise ValueError(f"link {k!r}: length {v} is not in (0, inf)")
        object.__setattr__(self, "lengths", MappingProxyType(lengths))
        if self.rates is not None:
            rates = {k: float(v) for k, v in self.rates.items()}
            if rates.keys() != lengths.keys():
                raise ValueError("rates and lengths cover different links")
            for k, r in rates.items():
                if not math.isclose(lengths[k], -math.log(r), rel_tol=4 * np.finfo(float).eps):
                    raise ValueError(f"link {k!r}: length does not match -log(rate)")
            object.__setattr__(self, "rates", MappingProxyType(rates))

    @classmethod
    def from_rates(cls, rates: Mapping[str, float]) -> LinkMetric:
        return cls({k: -math.log(r) for k, r in rates.items()}, rates)

    def success_rates(self) -> dict[str, float]:
        if self.rates is not None:
            return dict(self.rates)
        return {k: math.exp(-v) for k, v in self.lengths.items()}

    def scaled(self, c: float) -> LinkMetric:
        return LinkMetric({k: c * v for k, v in self.lengths.items()})

    def min_length(self) -> float:
        return min(self.lengths.values())

    def covers(self, tree: RoutedTree) -> None:
        missing = [e for e in tree.links if e not in self.lengths]
        if missing:
            raise MetricIncomplete(f"no length for links {missing}")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric nonnegative distances over ordered terminal labels."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        values = np.array(self.values, dtype=float)
        n = len(labels)
        if len(set(labels)) != n:
            raise ValueError("duplicate labels")
        if values.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {values.shape}")
        if np.any(np.diag(values) != 0.0):
            raise ValueError("diagonal must be zero")
        if not np.array_equal(values, values.T):
            raise ValueError("matrix is not symmetric")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("distances must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LabelMismatch(f"label {label!r} not in matrix") from None

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = pair
        return float(self.values[self.index(i), self.index(j)])

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.values, other.values)

    def reordered(self, labels: Iterable[str]) -> DistanceMatrix:
        labels = tuple(labels)
        if set(labels) != set(self.labels) or len(labels) != len(self.labels):
            raise LabelMismatch("label sets differ")
        idx = [self.index(lab) for lab in labels]
        return DistanceMatrix(labels, self.values[np.ix_(idx, idx)])

    def scaled(self, c: float) -> DistanceMatrix:
        return DistanceMatrix(self.labels, c * self.values)


# -- additive-metric evaluation -------------------------------------------


def nearest_common_ancestor(tree: RoutedTree, i: str, j: str) -> str:
    """Deepest node that is an ancestor of both ``i`` and ``j``.

    On a receiver-rooted tree this is the nearest common descendant.
    """
    up_i = tree.ancestors(i)
    seen = set(up_i)
    for node in tree.ancestors(j):
        if node in seen:
            return node
    raise AssertionError("unreachable: trees are connected")


nearest_common_descendant = nearest_common_ancestor


def path_distance(tree: RoutedTree, metric: LinkMetric, i: str, j: str) -> float:
    top = nearest_common_ancestor(tree, i, j)
    parts = []
    for end in (i, j):
        node = end
        while node != top:
            try:
                parts.append(metric.lengths[node])
            except KeyError:
                raise MetricIncomplete(f"no length for link {node!r}") from None
            node = tree.parent[node]
    # fsum is exactly rounded, so the result does not depend on argument order
    return math.fsum(parts)


def root_distances(tree: RoutedTree, metric: LinkMetric) -> dict[str, float]:
    metric.covers(tree)
    dist = {tree.root: 0.0}
    for node in tree.links:
        dist[node] = dist[tree.parent[node]] + metric.lengths[node]
    return dist


def terminal_distance_matrix(tree: RoutedTree, metric: LinkMetric) -> DistanceMatrix:
    """Exact additive distances between the root and all leaves."""
    labels = tree.terminals
    index = {lab: k for k, lab in enumerate(labels)}
    rd = root_distances(tree, metric)
    depth = np.array([rd[lab] for lab in labels])
    D = np.zeros((len(labels), len(labels)))
    D[0, 1:] = D[1:, 0] = depth[1:]
    clusters = tree.clusters()
    for node in (tree.root,) + tree.internal_nodes():
        groups = [[index[x] for x in clusters[c]] for c in tree.children(node)]
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                ia, ib = groups[a], groups[b]
                block = depth[ia][:, None] + depth[ib][None, :] - 2.0 * rd[node]
                D[np.ix_(ia, ib)] = block
                D[np.ix_(ib, ia)] = block.T
    return DistanceMatrix(labels, D)


def four_point_violation(dist: DistanceMatrix) -> float:
    """Largest gap between the two largest pair sums over all quadruples.

    Zero (up to rounding) exactly when the matrix is a tree metric.
    """
    D = dist.values
    n = len(dist.labels)
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                for m in range(k + 1, n):
                    sums = sorted((D[i, j] + D[k, m], D[i, k] + D[j, m], D[i, m] + D[j, k]))
                    worst = max(worst, sums[2] - sums[1])
    return worst


# -- construction ---------------------------------------------------------


def contract_links(tree: RoutedTree, nodes: Iterable[str]) -> RoutedTree:
    """Merge each listed internal node into its parent."""
    doomed = set(nodes)
    for n in doomed:
        if n == tree.root or tree.is_leaf(n):
            raise InvalidTree(f"cannot contract terminal {n!r}")
    parent = {}
    for node in tree.links:
        if node in doomed:
            continue
        p = tree.parent[node]
        while p in doomed:
            p = tree.parent[p]
        parent[node] = p
    return RoutedTree(tree.root, parent, tree.orientation)


def random_tree(
    n_leaves: int,
    kind: str = "binary",
    max_children: int = 2,
    rng_seed: int = 0,
    *,
    contract_prob: float = 0.5,
    root_label: str = "s",
    orientation: Orientation = Orientation.SOURCE_ROOTED,
) -> RoutedTree:
    """Random logical tree with leaves labelled "1".."n_leaves".

    Binary trees come from joining uniformly chosen pairs of subtrees until
    one remains, which then hangs below the root. General trees contract
    each internal link of such a binary tree with probability
    ``contract_prob``, skipping contractions that would give a node more
    than ``max_children`` children.
    """
    if n_leaves < 2:
        raise TooFewLeaves(f"need at least 2 leaves, got {n_leaves}")
    if kind not in ("binary", "general"):
        raise ValueError(f"unknown tree kind {kind!r}")
    if max_children < 2:
        raise ValueError("max_children must be at least 2")
    rng = np.random.default_rng(rng_seed)
    children: dict[str, list[str]] = {}
    pool = [str(k) for k in range(1, n_leaves + 1)]
    count = 0
    while len(pool) > 1:
        a, b = sorted(rng.choice(len(pool), size=2, replace=False), reverse=True)
        count += 1
        node = f"n{count}"
        children[node] = [pool.pop(a), pool.pop(b)]
        pool.append(node)
    top = pool[0]
    children[root_label] = [top]

    if kind == "general":
        # preorder over internal nodes below the top one
        stack = list(reversed(children[top]))
        while stack:
            node = stack.pop()
            if node not in children:
                continue
            parent = next(p for p, ks in children.items() if node in ks)
            merged = len(children[parent]) - 1 + len(children[node])
            if rng.random() < contract_prob and merged <= max_children:
                pos = children[parent].index(node)
                kids = children.pop(node)
                children[parent][pos : pos + 1] = kids
                stack.extend(reversed(kids))
            else:
                stack.extend(reversed(children[node]))

    parent_map = {}
    stack = [root_label]
    while stack:
        node = stack.pop()
        for c in children.get(node, ()):
            parent_map[c] = node
            stack.append(c)
    return RoutedTree(root_label, parent_map, orientation)


def random_rates(tree: RoutedTree, low: float, high: float, rng_seed: int = 0) -> LinkMetric:
    """Success rates drawn uniformly on [low, high] for every link."""
    if not (0.0 < low <= high < 1.0):
        raise ValueError(f"rate range ({low}, {high}) must satisfy 0 < low <= high < 1")
    rng = np.random.default_rng(rng_seed)
    draws = rng.uniform(low, high, size=len(tree.links))
    return LinkMetric.from_rates(dict(zip(tree.links, draws.tolist())))


# -- comparison -----------------------------------------------------------


def canonical_form(tree: RoutedTree):
    """Nested tuples with children sorted by their sorted leaf-label sets."""
    clusters = tree.clusters()
    keys = {n: tuple(sorted(c, key=label_key)) for n, c in clusters.items()}
    forms: dict[str, object] = {}
    for node in reversed(tree.preorder()):
        kids = tree.children(node)
        if not kids:
            forms[node] = node
        else:
            forms[node] = tuple(forms[k] for k in sorted(kids, key=lambda k: [label_key(x) for x in keys[k]]))
    return (tree.root, forms[tree.root])


def trees_equal(a: RoutedTree, b: RoutedTree) -> bool:
    """Rooted leaf-labelled topology equality; lengths and orientation ignored."""
    if a.root != b.root or set(a.leaves) != set(b.leaves):
        raise LabelMismatch(
            f"terminal labels differ: {a.terminals} vs {b.terminals}"
        )
    return canonical_form(a) == canonical_form(b)


def link_matching(a: RoutedTree, b: RoutedTree) -> dict[str, str]:
    """Map each link of ``a`` to the link of ``b`` with the same cluster.

    Assumes ``trees_equal(a, b)``.
    """
    by_cluster = {c: n for n, c in b.clusters().items() if n != b.root}
    ca = a.clusters()
    return {n: by_cluster[ca[n]] for n in a.links}


def to_newick_text(tree: RoutedTree) -> str:
    # local import keeps newick the single owner of the format
    from .newick import to_newick

    return to_newick(tree)
