"""Distance estimation from probe outcomes and its error decay."""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ZeroCountError
from .simulate import SampleSet, derive_seed, simulate
from .tree import DistanceMatrix, LinkMetric, RoutedTree, terminal_distance_matrix


class NegativeDistanceWarning(UserWarning):
    """An estimated off-diagonal distance came out negative and was set to 0."""


@dataclass(frozen=True)
class EstimatorConfig:
    zero_count_policy: str = "clamp"
    clamp_value: float = 0.5

    def __post_init__(self):
        if self.zero_count_policy not in ("clamp", "error"):
            raise ValueError(f"unknown zero-count policy {self.zero_count_policy!r}")
        if not self.clamp_value > 0:
            raise ValueError("clamp_value must be positive")


def distances_from_moments(labels: Sequence[str], marginals: np.ndarray, joint: np.ndarray) -> DistanceMatrix:
    """log(P_i P_j / P_ij^2) for every pair, from (estimated or exact) moments.

    Negative values are set to 0 with a :class:`NegativeDistanceWarning`.
    """
    p = np.asarray(marginals, dtype=float)
    J = np.asarray(joint, dtype=float)
    with np.errstate(divide="ignore"):
        D = np.log(np.outer(p, p) / J**2)
    np.fill_diagonal(D, 0.0)
    D = (D + D.T) / 2.0
    if np.any(D < 0):
        warnings.warn(
            f"{int(np.sum(D < 0)) // 2} negative distance estimate(s) clamped to 0",
            NegativeDistanceWarning,
            stacklevel=2,
        )
        D = np.maximum(D, 0.0)
    return DistanceMatrix(tuple(labels), D)


def empirical_distance_matrix(samples: SampleSet, cfg: EstimatorConfig = EstimatorConfig()) -> DistanceMatrix:
    """Plug-in estimate of the loss-metric distances between all terminals."""
    X = samples.outcomes.astype(np.int64)
    counts = (X.T @ X).astype(float)  # diagonal holds the marginal counts
    zero = counts == 0
    if zero.any():
        if cfg.zero_count_policy == "error":
            a, b = np.argwhere(zero)[0]
            raise ZeroCountError((samples.labels[a], samples.labels[b]))
        counts[zero] = cfg.clamp_value
    means = counts / samples.n
    return distances_from_moments(samples.labels, np.diag(means).copy(), means)


@dataclass
class DeviationPoint:
    n: int
    epsilon: float
    prob_exceed: float
    pair_exceed: dict[tuple[str, str], float] = field(default_factory=dict)
    pair_max_dev: dict[tuple[str, str], float] = field(default_factory=dict)


def deviation_curve(
    tree: RoutedTree,
    metric: LinkMetric,
    sample_sizes: Sequence[int],
    trials: int,
    epsilon: float,
    rng_seed: int,
    cfg: EstimatorConfig = EstimatorConfig(),
) -> list[DeviationPoint]:
    """Empirical P(max_ij |d_hat(i,j) - d(i,j)| >= epsilon) per sample size.

    Trial t at size index k is simulated with ``derive_seed(rng_seed, t, k)``.
    """
    if list(sample_sizes) != sorted(set(sample_sizes)):
        raise ValueError("sample sizes must be strictly increasing")
    if trials < 1:
        raise ValueError("need at least one trial")
    truth = terminal_distance_matrix(tree, metric)
    labels = truth.labels
    iu = np.triu_indices(len(labels), k=1)
    pairs = [(labels[a], labels[b]) for a, b in zip(*iu)]
    out = []
    for k, n in enumerate(sample_sizes):
        devs = np.empty((trials, len(pairs)))
        for t in range(trials):
            samples = simulate(tree, metric, n, derive_seed(rng_seed, t, k))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativeDistanceWarning)
                est = empirical_distance_matrix(samples, cfg).reordered(labels)
            devs[t] = np.abs(est.values - truth.values)[iu]
        exceed = devs >= epsilon
        out.append(
            DeviationPoint(
                n=n,
                epsilon=epsilon,
                prob_exceed=float(np.mean(exceed.any(axis=1))),
                pair_exceed=dict(zip(pairs, exceed.mean(axis=0).tolist())),
                pair_max_dev=dict(zip(pairs, devs.max(axis=0).tolist())),
            )
        )
    return out


def write_deviation_csv(points: Sequence[DeviationPoint], path: str | os.PathLike) -> None:
    pairs = list(points[0].pair_max_dev) if points else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "epsilon", "prob_exceed"] + [f"maxdev_{a}_{b}" for a, b in pairs])
        for p in points:
            w.writerow([p.n, p.epsilon, p.prob_exceed] + [f"{p.pair_max_dev[q]:.6g}" for q in pairs])
