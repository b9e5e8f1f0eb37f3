"""Command-line entry point: ``mlsbm {fit,simulate,eval,theory,convert}``.

Exit status is 0 on success, 2 for invalid input and 3 when a numerical
routine fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import aggregate_sparse
from .graph import (MultiLayerGraph, average_degrees, load_manifest_labels, load_multilayer, read_edge_file,
                    read_labels, save_multilayer, symmetrize_layer, write_labels)
from .harness import ExperimentSpec, emit_csv, emit_svg_lineplot, run_experiment
from .metrics import ccr, misclustered_count, misclustering_rate, nmi
from .spectral import EigensolverError, random_layer, spectral_init
from .theory import divergence_profile, minimax_rate, threshold_strong
from .vem_mlsbm import fit_mlsbm
from .vem_rmlsbm import fit_rmlsbm

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
FIT_METHODS = ("mlsbm", "rmlsbm", "agg_sbm", "single_layer")

log = logging.getLogger("mlsbm")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_fit(args) -> int:
    g = load_multilayer(args.manifest)
    K = args.k
    layer = random_layer(g.n_layers, args.seed) if args.random_layer else args.init_layer
    if args.method == "agg_sbm":
        agg = aggregate_sparse(g)
        fit = fit_mlsbm(agg, K, spectral_init(agg, 0, K, args.seed))
    elif args.method == "single_layer":
        one = g.layer(layer)
        fit = fit_mlsbm(one, K, spectral_init(one, 0, K, args.seed))
    else:
        tau = spectral_init(g, layer, K, args.seed)
        fit = (fit_mlsbm if args.method == "mlsbm" else fit_rmlsbm)(g, K, tau)
    report = {"method": args.method, "k": K, "init_layer": layer, "elbo": fit.elbo,
              "iterations": fit.state.iterations, "converged": fit.state.converged}
    truth = load_manifest_labels(args.manifest)
    if truth is not None:
        report.update(nmi=nmi(truth, fit.z_hat), ccr=ccr(truth, fit.z_hat))
    if args.out:
        write_labels(args.out, fit.z_hat)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = json.loads(Path(args.spec).read_text())
    for key, flag in (("seed", args.seed), ("replicates", args.replicates), ("workers", args.workers),
                      ("init_layer", args.init_layer), ("k", args.k)):
        if flag is not None:
            cfg[key] = flag
    if args.method:
        cfg["methods"] = args.method
    if args.random_layer:
        cfg["random_init_layer"] = True
    spec = ExperimentSpec.from_dict(cfg)
    rows = run_experiment(spec)
    emit_csv(rows, args.out, timing=args.timing)
    if args.svg:
        emit_svg_lineplot(rows, args.svg, title=f"{spec.sweep} ({spec.scenario})")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    z_true = read_labels(args.truth)
    z_hat = read_labels(args.estimate, len(z_true))
    print(json.dumps({"nmi": nmi(z_true, z_hat), "ccr": ccr(z_true, z_hat),
                      "misclustered": misclustered_count(z_true, z_hat),
                      "misclustering_rate": misclustering_rate(z_true, z_hat)}, indent=2))
    return EXIT_OK


def cmd_theory(args) -> int:
    out: dict = {}
    if args.a is not None or args.b is not None:
        if args.a is None or args.b is None or args.n is None:
            raise ValueError("--a, --b and --n are needed together")
        prof = divergence_profile(_floats(args.a), _floats(args.b), args.n)
        out["divergence_per_layer"] = prof.per_layer.tolist()
        out["divergence_aggregate"] = prof.aggregate
        out["rate_multilayer"] = minimax_rate(prof, args.k, args.s, "multilayer")
        out["rate_aggregate"] = minimax_rate(prof, args.k, args.s, "aggregate")
    if args.alpha1 is not None or args.alpha2 is not None:
        if args.alpha1 is None or args.alpha2 is None:
            raise ValueError("--alpha1 and --alpha2 are needed together")
        a1, a2 = _floats(args.alpha1), _floats(args.alpha2)
        for model in ("multilayer", "aggregate"):
            flag, margin = threshold_strong(a1, a2, args.k, model)
            out[f"threshold_{model}"] = {"margin": margin, "exact_recovery": flag}
    if not out:
        raise ValueError("give --a/--b/--n and/or --alpha1/--alpha2")
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_convert(args) -> int:
    layers = [symmetrize_layer(read_edge_file(p), args.n) for p in args.inputs]
    g = MultiLayerGraph(args.n, tuple(layers))
    labels = read_labels(args.labels, args.n) if args.labels else None
    names = [Path(p).name for p in args.inputs]
    if len(set(names)) != len(names):
        names = None
    path = save_multilayer(g, args.out, labels, names)
    print(json.dumps({"manifest": str(path), "average_degrees": average_degrees(g).round(4).tolist()}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlsbm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one model to one multi-layer graph")
    f.add_argument("manifest")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--method", choices=FIT_METHODS, default="rmlsbm")
    f.add_argument("--init-layer", type=int, default=0)
    f.add_argument("--random-layer", action="store_true", help="initialize from a seeded random layer")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="write 1-based labels here")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a planted-partition sweep from a JSON experiment file")
    s.add_argument("spec")
    s.add_argument("--out", required=True)
    s.add_argument("--svg")
    s.add_argument("--seed", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--replicates", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--init-layer", type=int)
    s.add_argument("--random-layer", action="store_true")
    s.add_argument("--method", action="append", help="repeatable; overrides the file's method list")
    s.add_argument("--timing", action="store_true", help="record wall time (makes output nondeterministic)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eval", help="score an estimated labelling against a reference")
    e.add_argument("truth")
    e.add_argument("estimate")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("theory", help="divergences, minimax rates and consistency thresholds")
    t.add_argument("--a", help="comma-separated within-block a per layer")
    t.add_argument("--b", help="comma-separated between-block b per layer")
    t.add_argument("--n", type=float)
    t.add_argument("--k", type=int, default=2)
    t.add_argument("--s", type=float, default=1.0)
    t.add_argument("--alpha1", help="comma-separated, a = alpha1 log N")
    t.add_argument("--alpha2", help="comma-separated, b = alpha2 log N")
    t.set_defaults(func=cmd_theory)

    c = sub.add_parser("convert", help="directed 1-based edge lists to an undirected manifest")
    c.add_argument("inputs", nargs="+")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--labels")
    c.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (EigensolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
