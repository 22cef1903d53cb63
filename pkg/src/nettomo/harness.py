"""Monte-Carlo experiment protocol: random trees, probing, estimation, inference.

Seeds are derived with ``derive_seed`` from the base seed and integer keys:

* tree shape of trial t:          (base, 0, t)
* link rates of trial t:          (base, 1, t)
* probes of trial t at size k:    (base, 2, t, k)

so any trial can be rerun alone and serial/parallel runs agree.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .errors import TopologyMismatch, ZeroCountError
from .estimate import EstimatorConfig, NegativeDistanceWarning, empirical_distance_matrix
from .infer import InferredTree, infer_tree
from .simulate import RNG_ID, derive_seed, simulate
from .tree import LinkMetric, Orientation, RoutedTree, link_matching, random_rates, random_tree, trees_equal

RESULT_COLUMNS = (
    "algorithm",
    "direction",
    "tree_kind",
    "n_leaves",
    "sample_size",
    "trials",
    "fraction_correct",
    "mean_eps_E",
    "aborted_trials",
    "base_seed",
    "rng_id",
)


@dataclass(frozen=True)
class ExperimentConfig:
    tree_kind: str = "binary"
    n_leaves: int = 10
    alpha_range: tuple[float, float] = (0.90, 0.99)
    sample_sizes: tuple[int, ...] = tuple(2**k for k in range(7, 15))
    trials: int = 100
    algorithms: tuple[str, ...] = ("nj", "rnj")
    direction: str = "forward"
    base_seed: int = 0
    zero_count_policy: str = "clamp"
    delta_override: float | None = None
    max_children: int = 4
    contract_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "alpha_range", tuple(float(a) for a in self.alpha_range))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        low, high = self.alpha_range
        if not (0.0 < low < high < 1.0):
            raise ValueError(f"alpha_range must satisfy 0 < low < high < 1, got {self.alpha_range}")
        if self.tree_kind not in ("binary", "general"):
            raise ValueError(f"unknown tree kind {self.tree_kind!r}")
        if self.direction not in ("forward", "reverse"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n_leaves < 2:
            raise ValueError("n_leaves must be at least 2")
        if not self.sample_sizes or any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise ValueError("sample_sizes must be non-empty and strictly increasing")
        if self.sample_sizes[0] < 1:
            raise ValueError("sample sizes must be positive")
        if not self.algorithms or set(self.algorithms) - {"nj", "rnj"}:
            raise ValueError(f"algorithms must be a non-empty subset of nj, rnj: {self.algorithms}")
        if self.zero_count_policy not in ("clamp", "error"):
            raise ValueError(f"unknown zero-count policy {self.zero_count_policy!r}")
        if self.delta_override is not None and not self.delta_override > 0:
            raise ValueError("delta_override must be positive")

    @property
    def delta(self) -> float:
        """Delta handed to general-tree inference: -log of the highest rate unless overridden."""
        if self.delta_override is not None:
            return self.delta_override
        return -math.log(self.alpha_range[1])

    @property
    def orientation(self) -> Orientation:
        return Orientation.RECEIVER_ROOTED if self.direction == "reverse" else Orientation.SOURCE_ROOTED

    @property
    def root_label(self) -> str:
        return "r" if self.direction == "reverse" else "s"


def _size(token: str) -> int:
    # sizes may be written as powers, e.g. 2**14
    if "**" in token:
        base, exp = token.split("**")
        return int(base) ** int(exp)
    return int(token)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in ("alpha_range", "sample_sizes", "algorithms"):
        items = raw.replace(",", " ").split()
        if key == "algorithms":
            return tuple(items)
        return tuple(float(x) if key == "alpha_range" else _size(x) for x in items)
    if key == "delta_override":
        return None if raw.lower() in ("", "none") else float(raw)
    if key in ("n_leaves", "trials", "base_seed", "max_children"):
        return int(raw, 0)
    if key == "contract_prob":
        return float(raw)
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """key=value lines; ``#`` starts a comment; list values separated by commas or spaces."""
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from None
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def relative_errors(truth: tuple[RoutedTree, LinkMetric], inferred: InferredTree) -> tuple[dict[str, float], float]:
    """Per-link |alpha_hat - alpha| / alpha over matched links, and their mean."""
    tree, metric = truth
    try:
        same = trees_equal(tree, inferred.tree)
    except ValueError:
        same = False
    if not same:
        raise TopologyMismatch("inferred topology differs from the true one")
    alpha = metric.success_rates()
    alpha_hat = inferred.rates
    match = link_matching(tree, inferred.tree)
    eps = {e: abs(alpha_hat[match[e]] - alpha[e]) / alpha[e] for e in tree.links}
    return eps, math.fsum(eps.values()) / len(eps)


@dataclass(frozen=True)
class TrialOutcome:
    """One (algorithm, sample size) cell of one trial; eps_E is None unless correct."""

    algorithm: str
    sample_size: int
    correct: bool
    eps_E: float | None
    aborted: bool = False


def run_trial(
    tree: RoutedTree, metric: LinkMetric, cfg: ExperimentConfig, trial: int
) -> list[TrialOutcome]:
    """Probe, estimate and infer on a given tree at every configured sample size."""
    est_cfg = EstimatorConfig(zero_count_policy=cfg.zero_count_policy)
    delta = cfg.delta if cfg.tree_kind == "general" else None
    out = []
    for k, n in enumerate(cfg.sample_sizes):
        samples = simulate(tree, metric, n, derive_seed(cfg.base_seed, 2, trial, k))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativeDistanceWarning)
                dist = empirical_distance_matrix(samples, est_cfg)
        except ZeroCountError:
            out.extend(TrialOutcome(a, n, False, None, aborted=True) for a in cfg.algorithms)
            continue
        for algo in cfg.algorithms:
            inferred = infer_tree(dist, algo, cfg.tree_kind, delta, tree.root, tree.orientation)
            if trees_equal(tree, inferred.tree):
                out.append(TrialOutcome(algo, n, True, relative_errors((tree, metric), inferred)[1]))
            else:
                out.append(TrialOutcome(algo, n, False, None))
    return out


def trial_tree(cfg: ExperimentConfig, trial: int) -> tuple[RoutedTree, LinkMetric]:
    tree = random_tree(
        cfg.n_leaves,
        cfg.tree_kind,
        max_children=cfg.max_children if cfg.tree_kind == "general" else 2,
        rng_seed=derive_seed(cfg.base_seed, 0, trial),
        contract_prob=cfg.contract_prob,
        root_label=cfg.root_label,
        orientation=cfg.orientation,
    )
    low, high = cfg.alpha_range
    return tree, random_rates(tree, low, high, derive_seed(cfg.base_seed, 1, trial))


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    sample_size: int
    trials: int
    count_correct: int
    aborted_trials: int
    mean_eps_E: float

    @property
    def fraction_correct(self) -> float:
        return self.count_correct / self.trials


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow] = field(default_factory=list)
    rng_id: str = RNG_ID

    def row(self, algorithm: str, sample_size: int) -> ResultRow:
        for r in self.rows:
            if r.algorithm == algorithm and r.sample_size == sample_size:
                return r
        raise KeyError((algorithm, sample_size))

    def series(self, algorithm: str, attr: str = "fraction_correct") -> list[float]:
        rows = sorted((r for r in self.rows if r.algorithm == algorithm), key=lambda r: r.sample_size)
        return [getattr(r, attr) for r in rows]


def aggregate(cfg: ExperimentConfig, outcomes: Sequence[TrialOutcome]) -> ExperimentResult:
    rows = []
    for algo in sorted(cfg.algorithms):
        for n in cfg.sample_sizes:
            cell = [o for o in outcomes if o.algorithm == algo and o.sample_size == n]
            good = [o.eps_E for o in cell if o.correct]
            rows.append(
                ResultRow(
                    algorithm=algo,
                    sample_size=n,
                    trials=len(cell),
                    count_correct=len(good),
                    aborted_trials=sum(o.aborted for o in cell),
                    mean_eps_E=math.fsum(good) / len(good) if good else math.nan,
                )
            )
    return ExperimentResult(cfg, rows)


def _run(cfg: ExperimentConfig) -> ExperimentResult:
    outcomes = []
    for t in range(cfg.trials):
        tree, metric = trial_tree(cfg, t)
        try:
            outcomes.extend(run_trial(tree, metric, cfg, t))
        except Exception as exc:
            raise RuntimeError(f"trial {t} failed: {exc}") from exc
    return aggregate(cfg, outcomes)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Forward (multicast) experiment, or reverse when the config says so."""
    if cfg.direction == "reverse":
        return run_reverse_experiment(cfg)
    return _run(cfg)


def run_reverse_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Same pipeline on receiver-rooted trees; the receiver takes the root role."""
    if cfg.direction != "reverse":
        cfg = dataclasses.replace(cfg, direction="reverse")
    return _run(cfg)


def write_results_csv(result: ExperimentResult, path: str | os.PathLike) -> None:
    cfg = result.config
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in sorted(result.rows, key=lambda r: (r.algorithm, r.sample_size)):
            w.writerow(
                [
                    r.algorithm,
                    cfg.direction,
                    cfg.tree_kind,
                    cfg.n_leaves,
                    r.sample_size,
                    r.trials,
                    f"{r.fraction_correct:.6f}",
                    "nan" if math.isnan(r.mean_eps_E) else f"{r.mean_eps_E:.8g}",
                    r.aborted_trials,
                    cfg.base_seed,
                    result.rng_id,
                ]
            )
