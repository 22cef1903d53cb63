"""Additive metrics built from link parameters and outcome distributions.

Natural logarithms throughout. Two constructions are provided: the loss
metric ``-log(alpha)`` and the log-determinant metric over binary outcome
transition matrices. Matrices over the same terminals can be fused by a
convex combination, which stays additive.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateDistribution,
    InvalidCoefficients,
    InvalidLength,
    InvalidRate,
    LabelMismatch,
    PermutationLike,
    SingularTransition,
    ZeroCountError,
)
from .tree import DistanceMatrix


def loss_link_length(alpha: float) -> float:
    if not (0.0 < alpha < 1.0):
        raise InvalidRate(f"success rate must lie in (0, 1), got {alpha}")
    return -math.log(alpha)


def rate_from_length(length: float) -> float:
    if not length > 0.0:
        raise InvalidLength(f"link length must be positive, got {length}")
    return math.exp(-length)


@dataclass(frozen=True)
class JointLeafDistribution:
    """P(X_i=1), P(X_j=1) and P(X_i X_j=1) for two terminals."""

    p_i: float
    p_j: float
    p_ij: float

    def __post_init__(self):
        slack = 1e-12
        for name in ("p_i", "p_j", "p_ij"):
            v = getattr(self, name)
            if not (-slack <= v <= 1.0 + slack):
                raise ValueError(f"{name}={v} is not a probability")
            # sums of exact event probabilities may overshoot by rounding
            object.__setattr__(self, name, min(max(float(v), 0.0), 1.0))
        if self.p_ij > min(self.p_i, self.p_j) + slack:
            raise ValueError("joint probability exceeds a marginal")
        if self.p_ij < self.p_i + self.p_j - 1.0 - slack:
            raise ValueError("joint probability below the Frechet lower bound")


def true_loss_distance(dist: JointLeafDistribution) -> float:
    """log(p_i p_j / p_ij^2)."""
    if min(dist.p_i, dist.p_j, dist.p_ij) <= 0.0:
        raise DegenerateDistribution(f"zero probability in {dist}")
    return math.log(dist.p_i * dist.p_j / dist.p_ij**2)


@dataclass(frozen=True)
class TransitionPair:
    """Forward P(X_j | X_i) and backward P(X_i | X_j) as 2x2 row-stochastic arrays."""

    forward: np.ndarray
    backward: np.ndarray

    def __post_init__(self):
        for name in ("forward", "backward"):
            m = np.array(getattr(self, name), dtype=float)
            if m.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2")
            if np.any(m < 0) or np.any(m > 1) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-12):
                raise ValueError(f"{name} is not row-stochastic")
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @classmethod
    def from_joint(cls, joint: np.ndarray) -> TransitionPair:
        """From a 2x2 table indexed [x_i, x_j] of probabilities or counts."""
        joint = np.asarray(joint, dtype=float)
        rows = joint.sum(axis=1, keepdims=True)
        cols = joint.sum(axis=0, keepdims=True)
        if np.any(rows == 0) or np.any(cols == 0):
            raise DegenerateDistribution("an outcome value never occurs; conditional undefined")
        return cls(joint / rows, (joint / cols).T)


def log_det_distance(t: TransitionPair) -> float:
    """-log|det P_ij| - log|det P_ji|."""
    total = 0.0
    for m in (t.forward, t.backward):
        det = abs(np.linalg.det(m))
        if det <= 1e-15:
            raise SingularTransition(f"transition matrix is singular: {m.tolist()}")
        if det >= 1.0 - 1e-15:
            raise PermutationLike(f"|det| = {det} >= 1 (permutation-like matrix)")
        total -= math.log(det)
    return total


def outcome_joint_counts(x_i: np.ndarray, x_j: np.ndarray) -> np.ndarray:
    """2x2 contingency table [x_i, x_j] of two binary outcome columns."""
    x_i = np.asarray(x_i, dtype=np.int64)
    x_j = np.asarray(x_j, dtype=np.int64)
    return np.bincount(2 * x_i + x_j, minlength=4).reshape(2, 2).astype(float)


def empirical_transition_pair(
    x_i: np.ndarray, x_j: np.ndarray, zero_count_policy: str = "clamp", clamp_value: float = 0.5
) -> TransitionPair:
    """Empirical conditionals; zero cells get ``clamp_value`` pseudo-counts under clamp."""
    counts = outcome_joint_counts(x_i, x_j)
    if np.any(counts == 0):
        if zero_count_policy == "error":
            raise ZeroCountError(("x_i", "x_j"))
        counts = np.where(counts == 0, clamp_value, counts)
    return TransitionPair.from_joint(counts)


def log_det_distance_matrix(samples, zero_count_policy: str = "clamp", clamp_value: float = 0.5) -> DistanceMatrix:
    """Log-det distances between destination terminals only.

    The constant terminal's outcome is identically one, so its conditionals
    are undefined and it is left out.
    """
    labels = samples.labels[1:]
    X = samples.outcomes[:, 1:]
    n = len(labels)
    D = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            pair = empirical_transition_pair(X[:, a], X[:, b], zero_count_policy, clamp_value)
            D[a, b] = D[b, a] = log_det_distance(pair)
    return DistanceMatrix(labels, D)


def fuse_distances(parts: Sequence[DistanceMatrix], coeffs: Sequence[float]) -> DistanceMatrix:
    """Entrywise convex combination sum_k a_k D_k."""
    if not parts:
        raise ValueError("need at least one distance matrix")
    if len(parts) != len(coeffs):
        raise InvalidCoefficients("one coefficient per matrix required")
    if abs(math.fsum(coeffs) - 1.0) > 1e-12:
        raise InvalidCoefficients(f"coefficients sum to {math.fsum(coeffs)}, not 1")
    labels = parts[0].labels
    for p in parts[1:]:
        if set(p.labels) != set(labels):
            raise LabelMismatch("matrices cover different terminals")
    if len(parts) == 1:
        return parts[0]
    total = sum(a * p.reordered(labels).values for a, p in zip(coeffs, parts))
    total = (total + total.T) / 2.0
    np.fill_diagonal(total, 0.0)
    return DistanceMatrix(labels, total)


def write_distance_csv(dist: DistanceMatrix, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dist.labels)
        for row in dist.values:
            w.writerow([f"{v:.17g}" for v in row])


def read_distance_csv(path: str | os.PathLike) -> DistanceMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty distance file")
    labels = [lab.strip() for lab in rows[0]]
    values = np.array([[float(v) for v in r] for r in rows[1:]])
    return DistanceMatrix(tuple(labels), values)
