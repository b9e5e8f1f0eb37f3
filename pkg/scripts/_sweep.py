"""Shared driver for the sweep scripts."""
import argparse
from pathlib import Path

from mlsbm.harness import ExperimentSpec, emit_csv, emit_svg_lineplot, run_experiment, summarize


def main(sweep: str, grid: list[int], **fixed):
    p = argparse.ArgumentParser(description=f"{sweep} sweep on planted multi-layer graphs")
    p.add_argument("--scenario", choices=("all_strong", "mixed"), default="all_strong")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid", type=int, nargs="+", default=grid)
    p.add_argument("--methods", nargs="+", default=["mlsbm", "rmlsbm", "agg_sbm", "majority", "single_layers"])
    p.add_argument("--random-layer", action="store_true")
    p.add_argument("--out-dir", default="results")
    args = p.parse_args()

    spec = ExperimentSpec(sweep=sweep, grid=args.grid, scenario=args.scenario, replicates=args.replicates,
                          seed=args.seed, methods=tuple(args.methods), random_init_layer=args.random_layer,
                          workers=args.workers, **fixed)
    rows = run_experiment(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{sweep}_{args.scenario}"
    emit_csv(rows, out / f"{stem}.csv")
    emit_svg_lineplot(rows, out / f"{stem}.svg", title=f"{sweep}, {args.scenario}")
    for method, curve in summarize(rows).items():
        cells = "  ".join(f"{v:g}:{mu:.3f}±{sd:.3f}" for v, (mu, sd) in curve.items())
        print(f"{method:>16}  {cells}")
