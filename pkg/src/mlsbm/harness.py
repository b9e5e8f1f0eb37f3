"""Simulation sweeps, real-data runs and their CSV/SVG artifacts.

Replicate seeds come from ``numpy.random.SeedSequence([seed, grid_index,
replicate])``: the first 32-bit word of its generated state is the seed
passed to the planted-data generator and to the initializer. Each grid
point is therefore reproducible on its own.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .baselines import aggregate_sparse, fit_single_layer_sbm, majority_vote
from .graph import GraphFormatError, MultiLayerGraph, generate_planted, load_manifest_labels, load_multilayer
from .metrics import ccr, misclustering_rate, nmi
from .spectral import random_layer, spectral_init
from .theory import oracle_maximize_T
from .vem_mlsbm import VEMOptions, fit_mlsbm
from .vem_rmlsbm import fit_rmlsbm

METHODS = ("mlsbm", "rmlsbm", "agg_sbm", "majority", "single_layers", "oracle")
SWEEPS = {"vary_n": "n", "vary_k": "k", "vary_m": "m"}


@dataclass
class ExperimentSpec:
    sweep: str
    grid: list
    n: int = 400
    k: int = 10
    m: int = 5
    scenario: str = "all_strong"
    replicates: int = 20
    seed: int = 0
    methods: tuple = ("mlsbm", "rmlsbm", "agg_sbm")
    init_layer: int = 0
    random_init_layer: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {sorted(SWEEPS)}")
        self.grid = [int(v) for v in self.grid]
        self.methods = tuple(self.methods)
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.scenario not in ("all_strong", "mixed"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"unknown methods {sorted(bad)}; choose from {METHODS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def point(self, value: int) -> tuple[int, int, int]:
        """``(N, K, M)`` at one grid value."""
        cfg = {"n": self.n, "k": self.k, "m": self.m}
        cfg[SWEEPS[self.sweep]] = value
        return cfg["n"], cfg["k"], cfg["m"]

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment fields {sorted(extra)}")
        return cls(**d)


@dataclass
class ResultRow:
    method: str
    value: float | str  # swept value, or a layer-subset name for real data
    replicate: int
    seed: int
    nmi: float
    ccr: float
    misclustering_rate: float
    elbo: float = math.nan
    wall_time: float = math.nan

    def __post_init__(self):
        for name in ("nmi", "ccr", "misclustering_rate"):
            v = getattr(self, name)
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise ValueError(f"{name}={v} outside [0, 1]")


COLUMNS = tuple(f.name for f in fields(ResultRow))


def replicate_seed(seed: int, grid_index: int, replicate: int) -> int:
    return int(np.random.SeedSequence([seed, grid_index, replicate]).generate_state(1)[0])


def _score(method, value, rep, seed, z_true, z_hat, K, elbo, t0) -> ResultRow:
    return ResultRow(method, value, rep, seed, nmi(z_true, z_hat), ccr(z_true, z_hat),
                     misclustering_rate(z_true, z_hat, K), float(elbo), time.perf_counter() - t0)


def run_methods(g: MultiLayerGraph, z_true: np.ndarray, K: int, methods: Sequence[str], value, rep: int,
                seed: int, init_layer: int = 0, opts: VEMOptions | None = None,
                oracle_ab: tuple | None = None) -> list[ResultRow]:
    """Fit each requested method on ``g`` and score it against ``z_true``."""
    rows = []
    tau0 = None
    if {"mlsbm", "rmlsbm"} & set(methods):
        tau0 = spectral_init(g, init_layer, K, seed, opts=opts)
    singles = None
    if {"single_layers", "majority"} & set(methods):
        singles = []
        for m in range(g.n_layers):
            t0 = time.perf_counter()
            layer = g.layer(m)
            fit = fit_single_layer_sbm(layer, K, spectral_init(layer, 0, K, seed, opts=opts), opts)
            singles.append((fit, time.perf_counter() - t0))
    for method in methods:
        t0 = time.perf_counter()
        if method == "mlsbm":
            fit = fit_mlsbm(g, K, tau0, opts)
            rows.append(_score(method, value, rep, seed, z_true, fit.z_hat, K, fit.elbo, t0))
        elif method == "rmlsbm":
            fit = fit_rmlsbm(g, K, tau0, opts)
            rows.append(_score(method, value, rep, seed, z_true, fit.z_hat, K, fit.elbo, t0))
        elif method == "agg_sbm":
            agg = aggregate_sparse(g)
            fit = fit_mlsbm(agg, K, spectral_init(agg, 0, K, seed, opts=opts), opts)
            rows.append(_score(method, value, rep, seed, z_true, fit.z_hat, K, fit.elbo, t0))
        elif method == "single_layers":
            for m, (fit, dt) in enumerate(singles):
                row = _score(f"single_layer_{m}", value, rep, seed, z_true, fit.z_hat, K, fit.elbo, t0)
                row.wall_time = dt
                rows.append(row)
        elif method == "majority":
            z = majority_vote([f.z_hat for f, _ in singles], K)
            row = _score(method, value, rep, seed, z_true, z, K, math.nan, t0)
            row.wall_time += sum(dt for _, dt in singles)
            rows.append(row)
        elif method == "oracle":
            if oracle_ab is None:
                raise ValueError("the oracle rule needs the true within/between parameters")
            z = oracle_maximize_T(g, *oracle_ab, K, mode="local", seed=seed)
            rows.append(_score(method, value, rep, seed, z_true, z, K, math.nan, t0))
        else:
            raise ValueError(f"unknown method {method!r}")
    return rows


def _run_task(args) -> list[ResultRow]:
    spec, gi, value, rep = args
    N, K, M = spec.point(value)
    seed = replicate_seed(spec.seed, gi, rep)
    g, truth, pi = generate_planted(N, K, M, spec.scenario, seed)
    layer = random_layer(M, seed) if spec.random_init_layer else spec.init_layer
    if not 0 <= layer < M:
        raise ValueError(f"init layer {layer} out of range for M={M}")
    oracle_ab = None
    if "oracle" in spec.methods:
        # planted matrices are lambda on the diagonal and eps elsewhere
        oracle_ab = (pi[:, 0, 0] * N, pi[:, 0, 1] * N) if K > 1 else None
    return run_methods(g, truth.z, K, spec.methods, value, rep, seed, layer, oracle_ab=oracle_ab)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Every grid point times every replicate, in (grid, replicate) order."""
    for value in spec.grid:
        N, K, M = spec.point(value)
        if K > N:
            raise ValueError(f"grid point {value}: K={K} exceeds N={N}")
        if N < 1 or K < 1 or M < 1:
            raise ValueError(f"grid point {value}: N, K and M must be positive")
    tasks = [(spec, gi, v, r) for gi, v in enumerate(spec.grid) for r in range(spec.replicates)]
    if spec.workers == 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_run_task, tasks))  # map keeps task order
    return [row for chunk in chunks for row in chunk]


def run_real_data(manifest, K: int, methods: Sequence[str], layer_subsets: Mapping[str, Sequence[int] | None] | None = None,
                  seed: int = 0, init_layer: int = 0, runs: int = 1) -> list[ResultRow]:
    """Fit the methods on named layer subsets of a labelled dataset.

    ``layer_subsets`` maps a name to layer indices (``None`` for all
    layers); the default is ``{"all": None}``. Run ``r`` uses seed
    ``seed + r``.
    """
    g = load_multilayer(manifest)
    z_true = load_manifest_labels(manifest)
    if z_true is None:
        raise GraphFormatError("manifest has no labels_file; cannot score")
    if "oracle" in methods:
        raise ValueError("the oracle rule is only defined for planted data")
    subsets = dict(layer_subsets or {"all": None})
    rows = []
    for name, idx in subsets.items():
        sub = g if idx is None else g.subset(list(idx))
        for r in range(runs):
            rows += run_methods(sub, z_true, K, methods, name, r, seed + r, init_layer)
    return rows


# --------------------------------------------------------------------------
# artifacts


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def emit_csv(rows: Iterable[ResultRow], path, timing: bool = False) -> Path:
    """Write rows with a fixed header. ``wall_time`` is left blank unless
    ``timing`` is set, so repeated runs give identical bytes."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            d = asdict(row)
            if not timing:
                d["wall_time"] = math.nan
            w.writerow([_fmt(d[c]) for c in COLUMNS])
    return path


def _parse(text: str):
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        return text


def load_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        out = []
        for rec in reader:
            d = {c: _parse(rec[c]) for c in COLUMNS}
            d["method"] = rec["method"]
            d["replicate"] = int(d["replicate"])
            d["seed"] = int(d["seed"])
            out.append(ResultRow(**d))
    return out


def summarize(rows: Iterable[ResultRow], metric: str = "nmi") -> dict[str, dict]:
    """``{method: {value: (mean, sd)}}`` with values sorted."""
    acc: dict[str, dict] = {}
    for r in rows:
        acc.setdefault(r.method, {}).setdefault(r.value, []).append(getattr(r, metric))
    return {m: {v: (float(np.mean(x)), float(np.std(x))) for v, x in sorted(d.items())} for m, d in acc.items()}


@dataclass
class PlotFrame:
    width: int = 640
    height: int = 400
    margin: int = 50
    y_range: tuple = (0.0, 1.0)
    x_range: tuple | None = None  # defaults to the data range
    colors: tuple = field(default=("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"))

    def mapper(self, xs):
        lo, hi = self.x_range or (min(xs), max(xs))
        if hi == lo:
            hi = lo + 1.0
        ylo, yhi = self.y_range
        sx = (self.width - 2 * self.margin) / (hi - lo)
        sy = (self.height - 2 * self.margin) / (yhi - ylo)
        return (lambda x: self.margin + (x - lo) * sx), (lambda y: self.height - self.margin - (y - ylo) * sy)


def emit_svg_lineplot(rows: Iterable[ResultRow], path, metric: str = "nmi", frame: PlotFrame | None = None,
                      title: str = "") -> Path:
    """Mean line per method with a +-1 sd band drawn as vertical whiskers."""
    frame = frame or PlotFrame()
    summary = summarize(rows, metric)
    xs = sorted({float(v) for d in summary.values() for v in d})
    path = Path(path)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width}" height="{frame.height}">',
             f'<rect width="{frame.width}" height="{frame.height}" fill="white"/>']
    if xs:
        fx, fy = frame.mapper(xs)
        m = frame.margin
        parts.append(f'<line x1="{m}" y1="{frame.height - m}" x2="{frame.width - m}" y2="{frame.height - m}" stroke="black"/>')
        parts.append(f'<line x1="{m}" y1="{m}" x2="{m}" y2="{frame.height - m}" stroke="black"/>')
        for x in xs:
            parts.append(f'<text x="{fx(x):.3f}" y="{frame.height - m + 15}" font-size="10" text-anchor="middle">{x:g}</text>')
        for y in np.linspace(*frame.y_range, 6):
            parts.append(f'<text x="{m - 5}" y="{fy(y):.3f}" font-size="10" text-anchor="end">{y:.2f}</text>')
        for i, (method, d) in enumerate(sorted(summary.items())):
            color = frame.colors[i % len(frame.colors)]
            pts = [(fx(float(v)), fy(mu), fy(mu - sd), fy(mu + sd)) for v, (mu, sd) in d.items()]
            line = " ".join(f"{px:.3f},{py:.3f}" for px, py, _, _ in pts)
            parts.append(f'<polyline data-method="{method}" fill="none" stroke="{color}" points="{line}"/>')
            for px, _, lo, hi in pts:
                parts.append(f'<line x1="{px:.3f}" y1="{lo:.3f}" x2="{px:.3f}" y2="{hi:.3f}" stroke="{color}" opacity="0.5"/>')
            parts.append(f'<text x="{frame.width - m + 5}" y="{m + 14 * i}" font-size="10" fill="{color}">{method}</text>')
    if title:
        parts.append(f'<text x="{frame.width / 2}" y="20" font-size="13" text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
