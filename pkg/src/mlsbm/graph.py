"""Multi-layer graph container, edge-list I/O and synthetic generators.

Nodes are 0-based internally. Files on disk use 1-based node indices.

Random numbers come from numpy's ``PCG64`` bit generator (128-bit state,
64-bit output) seeded through ``numpy.random.SeedSequence``; every
stochastic function takes an explicit integer seed, so a run reproduces
bit-for-bit for a fixed numpy version.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

SCENARIOS = ("all_strong", "mixed")


class GraphFormatError(ValueError):
    """Raised for malformed manifests, edge lists or label files."""


def _canonical_edges(pairs: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """Validate 0-based pairs, orient i<j, sort and drop duplicates."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise GraphFormatError(f"node index out of range for n={n}")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        bad = pairs[pairs[:, 0] == pairs[:, 1]][0, 0]
        raise GraphFormatError(f"self-loop on node {bad + 1}")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    uniq = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(lo) else np.empty((0, 2), np.int64)
    return uniq.astype(np.int64), len(lo) - len(uniq)


@dataclass(frozen=True, eq=False)
class MultiLayerGraph:
    """N nodes, M undirected binary layers stored as sorted ``i<j`` edge arrays."""

    n_nodes: int
    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphFormatError("n_nodes must be positive")
        if len(self.layers) < 1:
            raise GraphFormatError("at least one layer required")
        clean = []
        for edges in self.layers:
            e, _ = _canonical_edges(edges, self.n_nodes)
            e.setflags(write=False)
            clean.append(e)
        object.__setattr__(self, "layers", tuple(clean))

    @classmethod
    def from_edges(cls, n_nodes: int, layers: Iterable[Sequence[tuple[int, int]]]) -> "MultiLayerGraph":
        return cls(n_nodes, tuple(np.asarray(list(l), dtype=np.int64).reshape(-1, 2) for l in layers))

    @classmethod
    def from_dense(cls, adj: np.ndarray) -> "MultiLayerGraph":
        """Build from an ``(M, N, N)`` or ``(N, N)`` 0/1 array (upper triangle is read)."""
        adj = np.asarray(adj)
        if adj.ndim == 2:
            adj = adj[None]
        n = adj.shape[1]
        iu = np.triu_indices(n, 1)
        layers = []
        for a in adj:
            mask = a[iu] != 0
            layers.append(np.stack([iu[0][mask], iu[1][mask]], axis=1))
        return cls(n, tuple(layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def edge_counts(self) -> np.ndarray:
        return np.array([len(e) for e in self.layers], dtype=np.int64)

    @cached_property
    def _csr(self) -> tuple[sp.csr_matrix, ...]:
        out = []
        n = self.n_nodes
        for e in self.layers:
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            a.sort_indices()
            out.append(a)
        return tuple(out)

    def adjacency(self, m: int) -> sp.csr_matrix:
        """Symmetric sparse adjacency of layer ``m``; rows double as neighbour lists."""
        return self._csr[m]

    def dense(self) -> np.ndarray:
        """``(M, N, N)`` dense 0/1 array. Only meant for small graphs and tests."""
        return np.stack([a.toarray() for a in self._csr])

    def degrees(self) -> np.ndarray:
        """``(M, N)`` node degrees per layer."""
        return np.stack([np.diff(a.indptr) for a in self._csr])

    def layer(self, m: int) -> "MultiLayerGraph":
        return MultiLayerGraph(self.n_nodes, (self.layers[m],))

    def subset(self, layer_indices: Sequence[int]) -> "MultiLayerGraph":
        return MultiLayerGraph(self.n_nodes, tuple(self.layers[m] for m in layer_indices))

    @cached_property
    def stacked_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` with ``indptr`` of shape ``(M, N+1)`` into one index array."""
        ptrs, idx, offset = [], [], 0
        for a in self._csr:
            ptrs.append(a.indptr.astype(np.int64) + offset)
            idx.append(a.indices.astype(np.int64))
            offset += a.nnz
        indices = np.concatenate(idx) if idx else np.empty(0, np.int64)
        return np.stack(ptrs), indices

    def __eq__(self, other):
        if not isinstance(other, MultiLayerGraph):
            return NotImplemented
        return (self.n_nodes == other.n_nodes and self.n_layers == other.n_layers
                and all(np.array_equal(a, b) for a, b in zip(self.layers, other.layers)))

    def __repr__(self):
        return f"MultiLayerGraph(n_nodes={self.n_nodes}, edges={self.edge_counts.tolist()})"


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """0-based community labels ``z`` over ``{0..K-1}``."""

    z: np.ndarray
    K: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        if self.K < 1:
            raise ValueError("K must be positive")
        if z.ndim != 1 or (z.size and (z.min() < 0 or z.max() >= self.K)):
            raise ValueError(f"labels must lie in 0..{self.K - 1}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


# --------------------------------------------------------------------------
# file I/O


def read_edge_file(path: str | Path) -> np.ndarray:
    """Read 1-based whitespace-separated pairs; ``#`` starts a comment. Returns 0-based pairs."""
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"layer file missing: {path}")
    pairs = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected two node indices")
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-integer token in {line!r}") from None
        pairs.append((i - 1, j - 1))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def write_edge_file(path: str | Path, edges: np.ndarray) -> None:
    with open(path, "w") as fh:
        for i, j in np.asarray(edges):
            fh.write(f"{i + 1} {j + 1}\n")


def read_labels(path: str | Path, n_nodes: int | None = None) -> np.ndarray:
    """One 1-based integer label per line; returns 0-based labels."""
    path = Path(path)
    if not path.exists():
        raise GraphFormatError(f"labels file missing: {path}")
    vals = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(int(line) - 1)
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-integer label {line!r}") from None
    z = np.asarray(vals, dtype=np.int64)
    if n_nodes is not None and len(z) != n_nodes:
        raise GraphFormatError(f"labels file has {len(z)} entries, expected {n_nodes}")
    if z.size and z.min() < 0:
        raise GraphFormatError("labels must be >= 1")
    return z


def write_labels(path: str | Path, z: np.ndarray) -> None:
    Path(path).write_text("".join(f"{int(v) + 1}\n" for v in z))


def _read_manifest(manifest_path: str | Path) -> tuple[dict, Path]:
    manifest_path = Path(manifest_path)
    try:
        meta = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise GraphFormatError(f"manifest missing: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"manifest is not valid JSON: {exc}") from None
    for key in ("n_nodes", "layer_files"):
        if key not in meta:
            raise GraphFormatError(f"manifest lacks {key!r}")
    if not isinstance(meta["n_nodes"], int) or meta["n_nodes"] < 1:
        raise GraphFormatError("n_nodes must be a positive integer")
    if not meta["layer_files"]:
        raise GraphFormatError("manifest lists no layer files")
    return meta, manifest_path.parent


def load_multilayer(manifest_path: str | Path) -> MultiLayerGraph:
    """Load and validate the graph described by a JSON manifest.

    Relative layer paths are resolved against the manifest's directory.
    Duplicate edges (including reciprocal pairs) are dropped and counted in
    the log.
    """
    meta, base = _read_manifest(manifest_path)
    n = meta["n_nodes"]
    layers = []
    for name in meta["layer_files"]:
        pairs = read_edge_file(base / name)
        edges, dup = _canonical_edges(pairs, n)
        if dup:
            log.info("%s: dropped %d duplicate edges", name, dup)
        layers.append(edges)
    return MultiLayerGraph(n, tuple(layers))


def load_manifest_labels(manifest_path: str | Path) -> np.ndarray | None:
    meta, base = _read_manifest(manifest_path)
    if not meta.get("labels_file"):
        return None
    return read_labels(base / meta["labels_file"], meta["n_nodes"])


def save_multilayer(graph: MultiLayerGraph, directory: str | Path, labels: np.ndarray | None = None,
                    layer_names: Sequence[str] | None = None) -> Path:
    """Write ``manifest.json`` plus one edge file per layer; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(layer_names) if layer_names else [f"layer{m + 1}.txt" for m in range(graph.n_layers)]
    for name, edges in zip(names, graph.layers):
        write_edge_file(directory / name, edges)
    meta = {"n_nodes": graph.n_nodes, "layer_files": names}
    if labels is not None:
        write_labels(directory / "labels.txt", labels)
        meta["labels_file"] = "labels.txt"
    path = directory / "manifest.json"
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def symmetrize_layer(directed_edges: Iterable[tuple[int, int]], n: int) -> np.ndarray:
    """Undirected edge set of a directed 0-based edge list (reciprocal pairs merge)."""
    edges, _ = _canonical_edges(np.asarray(list(directed_edges), dtype=np.int64).reshape(-1, 2), n)
    return edges


def average_degrees(g: MultiLayerGraph) -> np.ndarray:
    return 2.0 * g.edge_counts / g.n_nodes


# --------------------------------------------------------------------------
# generators


def sample_labels(n: int, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(len(alpha), size=n, p=alpha).astype(np.int64)


def generate_mlsbm(z: GroundTruth, pi: np.ndarray, seed: int) -> MultiLayerGraph:
    """Sample every layer from its ``K x K`` block probability matrix.

    ``pi`` is an ``(M, K, K)`` array (or anything exposing ``.pi``). One
    uniform draw per upper-triangle pair per layer, layer by layer.
    """
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    if pi.ndim == 2:
        pi = pi[None]
    if np.any(pi < 0) or np.any(pi > 1) or not np.all(np.isfinite(pi)):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if pi.shape[1:] != (z.K, z.K):
        raise ValueError(f"pi slices must be {z.K}x{z.K}")
    rng = np.random.default_rng(seed)
    n = len(z.z)
    iu, ju = np.triu_indices(n, 1)
    zi, zj = z.z[iu], z.z[ju]
    layers = []
    for pm in pi:
        hit = rng.random(len(iu)) < pm[zi, zj]
        layers.append(np.stack([iu[hit], ju[hit]], axis=1))
    return MultiLayerGraph(n, tuple(layers))


def planted_layer_params(K: int, M: int, scenario: str, rng: np.random.Generator) -> np.ndarray:
    """Per-layer ``lambda*I + eps*(J - I)`` connectivity matrices, shape ``(M, K, K)``."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    out = np.empty((M, K, K))
    for m in range(M):
        if scenario == "all_strong":
            eps = 0.10 + rng.uniform(-0.02, 0.02)
            lam = 3.0 * eps
        else:
            eps = 0.09 + rng.uniform(-0.03, 0.03)
            lam = rng.uniform(1.5, 3.0) * eps
        out[m] = np.full((K, K), eps)
        np.fill_diagonal(out[m], lam)
    return out


def generate_planted(N: int, K: int, M: int, scenario: str, seed: int):
    """Planted-partition multi-layer graph.

    Returns ``(graph, truth, pi)`` where ``pi`` holds the sampled
    ``(M, K, K)`` connectivity matrices.
    """
    if not (N >= K >= 1 and M >= 1):
        raise ValueError("need N >= K >= 1 and M >= 1")
    label_ss, param_ss, edge_ss = np.random.SeedSequence(seed).spawn(3)
    z = sample_labels(N, np.full(K, 1.0 / K), np.random.default_rng(label_ss))
    pi = planted_layer_params(K, M, scenario, np.random.default_rng(param_ss))
    truth = GroundTruth(z, K)
    g = generate_mlsbm(truth, pi, int(edge_ss.generate_state(1, np.uint64)[0]))
    return g, truth, pi
