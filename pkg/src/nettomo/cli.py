"""Command-line entry points: gen-tree, simulate, estimate, infer, experiment."""

from __future__ import annotations

import argparse
import sys

from .estimate import EstimatorConfig, empirical_distance_matrix
from .harness import load_config, run_experiment, write_results_csv
from .infer import infer_tree, write_links_csv
from .metrics import read_distance_csv, write_distance_csv
from .newick import parse_newick, to_newick
from .simulate import derive_seed, read_samples_csv, simulate, write_samples_csv
from .tree import Orientation, random_rates, random_tree


def _orientation(reverse: bool) -> Orientation:
    return Orientation.RECEIVER_ROOTED if reverse else Orientation.SOURCE_ROOTED


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def cmd_gen_tree(args) -> int:
    tree = random_tree(
        args.leaves,
        args.kind,
        max_children=args.max_children if args.kind == "general" else 2,
        rng_seed=args.seed,
        root_label="r" if args.reverse else "s",
        orientation=_orientation(args.reverse),
    )
    _write_text(args.out, to_newick(tree))
    return 0


def cmd_simulate(args) -> int:
    with open(args.tree, encoding="utf-8") as fh:
        tree, _ = parse_newick(fh.read(), _orientation(args.reverse))
    # rates and probes use separate streams of the same seed
    metric = random_rates(tree, args.alpha_low, args.alpha_high, rng_seed=derive_seed(args.seed, 0))
    samples = simulate(tree, metric, args.n, rng_seed=derive_seed(args.seed, 1))
    write_samples_csv(samples, args.out)
    if args.truth:
        _write_text(args.truth, to_newick(tree, metric))
    return 0


def cmd_estimate(args) -> int:
    samples = read_samples_csv(args.samples)
    dist = empirical_distance_matrix(samples, EstimatorConfig(zero_count_policy=args.zero_count))
    write_distance_csv(dist, args.out)
    return 0


def cmd_infer(args) -> int:
    dist = read_distance_csv(args.dist)
    if args.kind == "general" and args.delta is None:
        print("error: --delta is required for general trees", file=sys.stderr)
        return 2
    result = infer_tree(dist, args.algo, args.kind, args.delta, orientation=_orientation(args.reverse))
    _write_text(args.out, to_newick(result.tree, dict(result.lengths)))
    if args.links:
        write_links_csv(result, args.links)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    write_results_csv(run_experiment(cfg), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nettomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-tree", help="random logical routing tree as Newick")
    p.add_argument("--leaves", type=int, required=True)
    p.add_argument("--kind", choices=("binary", "general"), default="binary")
    p.add_argument("--max-children", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reverse", action="store_true", help="receiver-rooted tree with root 'r'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("simulate", help="probe outcomes on a tree with random link rates")
    p.add_argument("--tree", required=True)
    p.add_argument("--alpha-low", type=float, default=0.90)
    p.add_argument("--alpha-high", type=float, default=0.99)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reverse", action="store_true", help="reverse multicast probing")
    p.add_argument("--truth", help="also write the tree with true link lengths here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="distance matrix from probe outcomes")
    p.add_argument("--samples", required=True)
    p.add_argument("--zero-count", choices=("clamp", "error"), default="clamp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer", help="reconstruct the tree from a distance matrix")
    p.add_argument("--dist", required=True)
    p.add_argument("--algo", choices=("nj", "rnj"), default="rnj")
    p.add_argument("--kind", choices=("binary", "general"), default="binary")
    p.add_argument("--delta", type=float)
    p.add_argument("--reverse", action="store_true", help="label the output receiver-rooted")
    p.add_argument("--out", required=True)
    p.add_argument("--links", help="link table CSV")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("experiment", help="run a configured Monte-Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
