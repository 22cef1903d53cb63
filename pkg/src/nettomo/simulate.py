"""Multicast and reverse-multicast loss probing on routing trees.

Both directions share one propagation core over the stored structure:
a probe reaches node k iff it reached k's structural parent and link k
was in the good state. In forward mode the structural root is the source
and the outcome at k is receipt at k. In reverse mode the root is the
receiver and the outcome at a source is receipt at the receiver of that
source's packet, which is the same product of link states along the path.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MetricIncomplete
from .tree import LinkMetric, Orientation, RoutedTree

RNG_ID = "numpy.PCG64"


@dataclass(frozen=True, eq=False)
class SampleSet:
    """n x |U| matrix of 0/1 outcomes; column 0 is the constant terminal."""

    labels: tuple[str, ...]
    outcomes: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.outcomes, dtype=np.uint8)
        if X.ndim != 2 or X.shape[1] != len(self.labels):
            raise ValueError(f"outcome shape {X.shape} does not match {len(self.labels)} labels")
        if X.shape[0] < 1:
            raise ValueError("need at least one probe")
        if np.any(X > 1):
            raise ValueError("outcomes must be 0/1")
        if not np.all(X[:, 0] == 1):
            raise ValueError(f"column of constant terminal {self.labels[0]!r} must be all ones")
        X.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "outcomes", X)

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    def column(self, label: str) -> np.ndarray:
        return self.outcomes[:, self.labels.index(label)]

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.outcomes, other.outcomes)


def _rates_for(tree: RoutedTree, metric: LinkMetric | Mapping[str, float]) -> np.ndarray:
    rates = metric.success_rates() if isinstance(metric, LinkMetric) else dict(metric)
    missing = [e for e in tree.links if e not in rates]
    if missing:
        raise MetricIncomplete(f"no success rate for links {missing}")
    alpha = np.array([rates[e] for e in tree.links], dtype=float)
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("success rates must lie in [0, 1]")
    return alpha


def propagate(tree: RoutedTree, alpha: np.ndarray, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Outcome column for every node; link states drawn as one (n, |E|) block."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    good = rng.random((n, len(tree.links))) < alpha
    X = {tree.root: np.ones(n, dtype=bool)}
    for k, node in enumerate(tree.links):
        X[node] = X[tree.parent[node]] & good[:, k]
    return X


def _simulate(tree, metric, n, rng_seed) -> SampleSet:
    alpha = _rates_for(tree, metric)
    X = propagate(tree, alpha, n, np.random.default_rng(rng_seed))
    labels = tree.terminals
    return SampleSet(labels, np.column_stack([X[lab] for lab in labels]).astype(np.uint8))


def simulate_multicast(
    tree: RoutedTree, metric: LinkMetric | Mapping[str, float], n: int, rng_seed: int
) -> SampleSet:
    """Loss outcomes at the source and destinations for ``n`` multicast probes.

    ``metric`` may be a plain rate mapping, which allows the degenerate
    rates 0 and 1.
    """
    if tree.orientation != Orientation.SOURCE_ROOTED:
        raise ValueError("multicast probing needs a source-rooted tree")
    return _simulate(tree, metric, n, rng_seed)


def simulate_reverse_multicast(
    tree: RoutedTree, metric: LinkMetric | Mapping[str, float], n: int, rng_seed: int
) -> SampleSet:
    """Outcomes observed at the receiver for ``n`` reverse-multicast probes.

    Column 0 is the receiver (always one); column for source i is one iff
    the receiver got i's packet.
    """
    if tree.orientation != Orientation.RECEIVER_ROOTED:
        raise ValueError("reverse multicast probing needs a receiver-rooted tree")
    return _simulate(tree, metric, n, rng_seed)


def simulate(tree: RoutedTree, metric, n: int, rng_seed: int) -> SampleSet:
    """Dispatch on the tree's orientation."""
    if tree.orientation == Orientation.RECEIVER_ROOTED:
        return simulate_reverse_multicast(tree, metric, n, rng_seed)
    return simulate_multicast(tree, metric, n, rng_seed)


def write_samples_csv(samples: SampleSet, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(samples.labels)
        w.writerows(samples.outcomes.tolist())


def read_samples_csv(path: str | os.PathLike) -> SampleSet:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        labels = tuple(lab.strip() for lab in next(reader))
        rows = [[int(v) for v in r] for r in reader if r]
    return SampleSet(labels, np.array(rows, dtype=np.uint8).reshape(len(rows), len(labels)))



def derive_seed(base_seed: int, *keys: int) -> int:
    """64-bit seed for a sub-stream, mixed from the base seed and integer keys.

    Uses numpy's SeedSequence hashing, so the result depends only on the
    values, never on call order or scheduling.
    """
    words = np.random.SeedSequence([base_seed, *keys]).generate_state(2, dtype=np.uint32)
    return int(words[0]) << 32 | int(words[1])
