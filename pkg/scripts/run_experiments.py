"""Run one or more experiment configs and print fraction-correct / eps_E tables.

    python3 scripts/run_experiments.py scripts/configs/*.cfg --outdir results/
"""

import argparse
import math
import pathlib
import time

from nettomo.harness import load_config, run_experiment, write_results_csv


def table(result) -> str:
    cfg = result.config
    lines = [f"{cfg.direction} {cfg.tree_kind} N={cfg.n_leaves} alpha={cfg.alpha_range} trials={cfg.trials}"]
    lines.append(f"{'n':>8} " + " ".join(f"{a + ' frac':>10} {a + ' eps_E':>10}" for a in sorted(cfg.algorithms)))
    for n in cfg.sample_sizes:
        cells = []
        for a in sorted(cfg.algorithms):
            r = result.row(a, n)
            eps = "-" if math.isnan(r.mean_eps_E) else f"{r.mean_eps_E:.4f}"
            cells.append(f"{r.fraction_correct:>10.2f} {eps:>10}")
        lines.append(f"{n:>8} " + " ".join(cells))
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for path in args.configs:
        t0 = time.perf_counter()
        result = run_experiment(load_config(path))
        out = outdir / (pathlib.Path(path).stem + ".csv")
        write_results_csv(result, out)
        print(table(result))
        print(f"-> {out} ({time.perf_counter() - t0:.1f}s)\n")


if __name__ == "__main__":
    main()
