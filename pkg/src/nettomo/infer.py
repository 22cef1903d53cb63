"""Distance-based reconstruction of rooted routing trees.

Four agglomerative algorithms over a matrix of terminal distances whose
root row/column belongs to the source (or receiver):

* ``nj_binary``   -- neighbor joining with the Q score, binary output
* ``rnj_binary``  -- rooted neighbor joining: join the pair whose nearest
  common ancestor is farthest from the root (largest rho score)
* ``rnj_general`` -- rooted NJ that also absorbs every node within
  ``delta / 2`` of the joined pair's rho score as a further sibling
* ``nj_general``  -- NJ pair selection with the same absorption rule

Ties in the selection score are broken by taking the lexicographically
smallest (sorted) label pair; within the chosen pair the smaller label
plays the role of i* in the absorption test. Working lengths may turn
negative under noise and are kept as-is until converted to rates.
"""

from __future__ import annotations

import csv
import heapq
import math
import os
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import LabelMismatch, TooFewLeaves
from .tree import DistanceMatrix, Orientation, RoutedTree, label_key


@dataclass(frozen=True)
class InferenceConfig:
    """``delta`` is the (estimated) minimum link length; siblings are absorbed within delta/2."""

    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")


@dataclass(frozen=True, eq=False)
class InferredTree:
    tree: RoutedTree
    lengths: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "lengths", MappingProxyType(dict(self.lengths)))

    @property
    def flagged(self) -> frozenset[str]:
        """Links whose inferred length is not positive."""
        return frozenset(e for e, v in self.lengths.items() if not v > 0)

    @property
    def rates(self) -> dict[str, float]:
        return rates_from_tree(self)[0]


def rates_from_tree(t: InferredTree) -> tuple[dict[str, float], frozenset[str]]:
    """Success rate exp(-length) per link; non-positive lengths give rate 1 and a flag."""
    rates = {e: (math.exp(-v) if v > 0 else 1.0) for e, v in t.lengths.items()}
    return rates, t.flagged


def rho(dist: DistanceMatrix, source: str, i: str, j: str) -> float:
    """Estimated distance from the root to the nearest common ancestor of i and j."""
    return (dist[source, i] + dist[source, j] - dist[i, j]) / 2.0


class _Namer:
    def __init__(self, taken):
        self.taken = set(taken)
        self.count = 0

    def __call__(self) -> str:
        while True:
            self.count += 1
            name = f"f{self.count}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _setup(dist: DistanceMatrix, source: str | None):
    source = dist.labels[0] if source is None else source
    if source not in dist.labels:
        raise LabelMismatch(f"source {source!r} not among matrix labels")
    dests = [lab for lab in dist.labels if lab != source]
    if len(dests) < 2:
        raise TooFewLeaves(f"need at least 2 destinations, got {len(dests)}")
    return source, dests


def _best_pair(score: np.ndarray, names: list[str]) -> tuple[int, int]:
    """Arg-max over the upper triangle; ties go to the smallest sorted label pair."""
    top = np.max(score)
    cands = np.argwhere(score == top)

    def key(ab):
        return tuple(sorted((names[ab[0]], names[ab[1]])))

    a, b = min(cands.tolist(), key=key)
    if names[a] > names[b]:
        a, b = b, a
    return a, b


def _finish(source, parent, lengths, orientation) -> InferredTree:
    # insertion order from the root down keeps output deterministic
    order = {}
    children: dict[str, list[str]] = {}
    for c, p in parent.items():
        children.setdefault(p, []).append(c)
    stack = [source]
    while stack:
        node = stack.pop()
        kids = sorted(children.get(node, ()), key=label_key)
        for c in kids:
            order[c] = parent[c]
        stack.extend(reversed(kids))
    tree = RoutedTree(source, order, orientation)
    return InferredTree(tree, {e: lengths[e] for e in tree.links})


# -- rooted neighbor joining ---------------------------------------------


def _rnj(dist, source, delta, orientation) -> InferredTree:
    source, dests = _setup(dist, source)
    n = len(dests)
    cap = 2 * n
    names = list(dests) + [""] * n
    namer = _Namer(dist.labels)
    d = dist.values[np.ix_([dist.index(x) for x in dests], [dist.index(x) for x in dests])]
    root_d = np.array([dist[source, x] for x in dests] + [0.0] * n)

    R = np.full((cap, cap), -np.inf)
    R[:n, :n] = (root_d[:n, None] + root_d[None, :n] - d) / 2.0
    active = np.zeros(cap, dtype=bool)
    active[:n] = True
    np.fill_diagonal(R, -np.inf)

    # max-heap of candidate pairs with lazy deletion; the sorted label pair
    # in the key makes ties resolve to the lexicographically smallest pair
    def entry(x, y):
        if names[y] < names[x]:
            x, y = y, x
        return (-R[x, y], names[x], names[y], x, y)

    heap = [entry(x, y) for x in range(n) for y in range(x + 1, n)]
    heapq.heapify(heap)

    parent: dict[str, str] = {}
    lengths: dict[str, float] = {}
    nxt = n
    while active.sum() > 1:
        while True:
            _, _, _, a, b = heapq.heappop(heap)
            if active[a] and active[b]:
                break
        f = namer()
        names[nxt] = f
        rho_ab = R[a, b]
        for x in (a, b):
            parent[names[x]] = f
            lengths[names[x]] = root_d[x] - rho_ab
        active[a] = active[b] = False
        if delta is not None:
            # every remaining k with rho(i*,j*) - rho(i*,k) <= delta/2 joins f
            near = active & (rho_ab - R[a] <= delta / 2.0)
            for k in np.flatnonzero(near):
                parent[names[k]] = f
                lengths[names[k]] = root_d[k] - rho_ab
            active &= ~near
        root_d[nxt] = rho_ab
        row = (R[a] + R[b]) / 2.0
        row[~active] = -np.inf
        R[nxt, :] = row
        R[:, nxt] = row
        R[nxt, nxt] = -np.inf
        for k in np.flatnonzero(active):
            heapq.heappush(heap, entry(nxt, k))
        active[nxt] = True
        nxt += 1
    (last,) = np.flatnonzero(active)
    parent[names[last]] = source
    lengths[names[last]] = root_d[last]
    return _finish(source, parent, lengths, orientation)


def rnj_binary(dist: DistanceMatrix, source: str | None = None, orientation=Orientation.SOURCE_ROOTED) -> InferredTree:
    return _rnj(dist, source, None, orientation)


def rnj_general(
    dist: DistanceMatrix, cfg: InferenceConfig, source: str | None = None, orientation=Orientation.SOURCE_ROOTED
) -> InferredTree:
    return _rnj(dist, source, cfg.delta, orientation)


# -- neighbor joining ----------------------------------------------------


def _nj(dist, source, delta, orientation) -> InferredTree:
    source, dests = _setup(dist, source)
    n = len(dests)
    cap = 2 * n + 1
    names = [source] + list(dests) + [""] * n
    namer = _Namer(dist.labels)
    idx = [dist.index(x) for x in names[: n + 1]]
    D = np.zeros((cap, cap))
    D[: n + 1, : n + 1] = dist.values[np.ix_(idx, idx)]
    in_u = np.zeros(cap, dtype=bool)
    in_u[: n + 1] = True
    in_d = in_u.copy()
    in_d[0] = False
    # row 0 is the root, or the internal node standing in for it once the
    # root itself has been joined as one half of a cherry
    top = source
    built: set[str] = set()

    parent: dict[str, str] = {}
    lengths: dict[str, float] = {}
    nxt = n + 1
    while in_d.sum() > 1:
        size_u = int(in_u.sum())
        sums = D[:, in_u].sum(axis=1)
        Q = sums[:, None] + sums[None, :] - (size_u - 2) * D
        pair_d = np.triu(np.outer(in_d, in_d), k=1)
        a, b = _best_pair(np.where(pair_d, Q, -np.inf), names)
        with_root = np.flatnonzero(in_d)
        x = with_root[np.argmax(Q[0, with_root])]
        if Q[0, x] > Q[a, b]:
            a, b = 0, x

        rest = np.flatnonzero(in_u & ~np.isin(np.arange(cap), (a, b)))
        la = np.mean((D[rest, a] + D[a, b] - D[rest, b]) / 2.0)
        lb = np.mean((D[rest, b] + D[a, b] - D[rest, a]) / 2.0)
        # a node within delta/2 of a stand-in top is that same node
        merge_ok = delta is not None and top != source

        if a == 0:
            if merge_ok and la <= delta / 2.0:
                parent[names[b]] = top
                lengths[names[b]] = D[0, b]
                in_u[b] = in_d[b] = False
                continue
            if delta is not None and lb <= delta / 2.0 and names[b] in built:
                # b is itself the node adjacent to the top
                parent[names[b]] = top
                lengths[names[b]] = D[0, b]
                D[0, :] = D[b, :]
                D[:, 0] = D[:, b]
                D[0, 0] = 0.0
                in_u[b] = in_d[b] = False
                names[0] = top = names[b]
                continue
            f = namer()
            parent[f] = top
            lengths[f] = la
            parent[names[b]] = f
            lengths[names[b]] = lb
            row = 0.5 * (D[:, 0] - la) + 0.5 * (D[:, b] - lb)
            in_u[b] = in_d[b] = False
            row[~in_u] = 0.0
            D[0, :] = row
            D[:, 0] = row
            D[0, 0] = 0.0
            names[0] = top = f
            continue

        rho_ab = (D[0, a] + D[0, b] - D[a, b]) / 2.0
        absorbed = np.zeros(cap, dtype=bool)
        if delta is not None:
            others = in_d.copy()
            others[[a, b]] = False
            rho_all = (D[0][:, None] + D[0][None, :] - D) / 2.0
            rho_all[~others] = -np.inf
            rho_all[:, ~others] = -np.inf
            np.fill_diagonal(rho_all, -np.inf)
            # a candidate with a deeper partner still sits in an unresolved subtree
            resolved = rho_all.max(axis=1) - rho_ab <= delta / 2.0
            rho_a = (D[0, a] + D[0] - D[a]) / 2.0
            absorbed = others & resolved & (rho_ab - rho_a <= delta / 2.0)
        if merge_ok and rho_ab <= delta / 2.0:
            for k in [a, b, *np.flatnonzero(absorbed)]:
                parent[names[k]] = top
                lengths[names[k]] = D[0, k]
            in_u[[a, b]] = in_d[[a, b]] = False
            in_u &= ~absorbed
            in_d &= ~absorbed
            continue
        f = names[nxt] = namer()
        built.add(f)
        for k in np.flatnonzero(absorbed):
            parent[names[k]] = f
            lengths[names[k]] = D[0, k] - rho_ab
        parent[names[a]] = parent[names[b]] = f
        lengths[names[a]], lengths[names[b]] = la, lb
        row = 0.5 * (D[:, a] - la) + 0.5 * (D[:, b] - lb)
        in_u[[a, b]] = in_d[[a, b]] = False
        in_u &= ~absorbed
        in_d &= ~absorbed
        row[~in_u] = 0.0
        D[nxt, :] = row
        D[:, nxt] = row
        D[nxt, nxt] = 0.0
        in_u[nxt] = in_d[nxt] = True
        nxt += 1
    for last in np.flatnonzero(in_d):
        parent[names[last]] = top
        lengths[names[last]] = D[0, last]
    return _finish(source, parent, lengths, orientation)


def nj_binary(dist: DistanceMatrix, source: str | None = None, orientation=Orientation.SOURCE_ROOTED) -> InferredTree:
    return _nj(dist, source, None, orientation)


def nj_general(
    dist: DistanceMatrix, cfg: InferenceConfig, source: str | None = None, orientation=Orientation.SOURCE_ROOTED
) -> InferredTree:
    return _nj(dist, source, cfg.delta, orientation)


def infer_tree(
    dist: DistanceMatrix,
    algo: str,
    kind: str,
    delta: float | None = None,
    source: str | None = None,
    orientation=Orientation.SOURCE_ROOTED,
) -> InferredTree:
    """Dispatch to one of the four algorithms; ``delta`` is required for general trees."""
    if algo not in ("nj", "rnj"):
        raise ValueError(f"unknown algorithm {algo!r}")
    if kind == "binary":
        fn = nj_binary if algo == "nj" else rnj_binary
        return fn(dist, source, orientation)
    if kind == "general":
        if delta is None:
            raise ValueError("general-tree inference needs delta")
        fn = nj_general if algo == "nj" else rnj_general
        return fn(dist, InferenceConfig(delta), source, orientation)
    raise ValueError(f"unknown tree kind {kind!r}")


def write_links_csv(t: InferredTree, path: str | os.PathLike) -> None:
    rates, flagged = rates_from_tree(t)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parent_label", "child_label", "length", "rate", "flag"])
        for e in t.tree.links:
            w.writerow(
                [t.tree.parent[e], e, f"{t.lengths[e]:.17g}", f"{rates[e]:.17g}", "nonpositive" if e in flagged else ""]
            )
