"""Aggregation, per-layer fits and majority voting."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import MultiLayerGraph
from .vem_mlsbm import FitResult, VEMOptions, fit_mlsbm


def _layer_sum(g: MultiLayerGraph):
    total = g.adjacency(0).copy()
    for m in range(1, g.n_layers):
        total = total + g.adjacency(m)
    return total.tocoo()


def _threshold(g: MultiLayerGraph, above: float) -> MultiLayerGraph:
    s = _layer_sum(g)
    keep = (s.data > above) & (s.row < s.col)
    return MultiLayerGraph(g.n_nodes, (np.stack([s.row[keep], s.col[keep]], axis=1),))


def aggregate_mean(g: MultiLayerGraph) -> MultiLayerGraph:
    """Edge where the pair is linked in strictly more than half of the layers."""
    return _threshold(g, g.n_layers / 2)


def aggregate_sparse(g: MultiLayerGraph) -> MultiLayerGraph:
    """Union of all layers."""
    return _threshold(g, 0)


def fit_single_layer_sbm(layer: MultiLayerGraph, K: int, init_tau: np.ndarray,
                         opts: VEMOptions | None = None) -> FitResult:
    if layer.n_layers != 1:
        raise ValueError("expected a single-layer graph; use g.layer(m)")
    return fit_mlsbm(layer, K, init_tau, opts)


def confusion_matrix(z_ref, z, K: int | None = None) -> np.ndarray:
    """Counts ``C[a, b]`` of nodes with reference label ``a`` and label ``b``."""
    z_ref, z = np.asarray(z_ref, dtype=np.int64), np.asarray(z, dtype=np.int64)
    if z_ref.shape != z.shape:
        raise ValueError("label vectors differ in length")
    k = max(K or 0, int(z_ref.max(initial=-1)) + 1, int(z.max(initial=-1)) + 1)
    c = np.zeros((k, k), dtype=np.int64)
    np.add.at(c, (z_ref, z), 1)
    return c


def best_permutation(conf: np.ndarray) -> np.ndarray:
    """``perm[b]`` = reference label matched to label ``b``, maximising total agreement.

    Among optimal matchings the one with most fixed points wins: the
    integer weights are scaled by ``k + 1`` and the identity gets a unit
    bonus, which can never outweigh a single unit of agreement.
    """
    k = conf.shape[0]
    weight = conf.astype(np.int64) * (k + 1) + np.eye(k, dtype=np.int64)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    perm = np.empty(k, dtype=np.int64)
    perm[cols] = rows
    return perm


def align_labels(z_ref, z, K: int) -> np.ndarray:
    """Relabel ``z`` by the bijection that maximises agreement with ``z_ref``."""
    conf = confusion_matrix(z_ref, z, K)
    return best_permutation(conf)[np.asarray(z, dtype=np.int64)]


def majority_vote(assignments: Sequence[np.ndarray], K: int) -> np.ndarray:
    """Per-node modal label after aligning every assignment to the first; ties go low."""
    if len(assignments) == 0:
        raise ValueError("majority_vote needs at least one assignment")
    ref = np.asarray(assignments[0], dtype=np.int64)
    aligned = [ref] + [align_labels(ref, z, K) for z in assignments[1:]]
    k = max(K, max(int(a.max(initial=-1)) + 1 for a in aligned))
    votes = np.zeros((len(ref), k), dtype=np.int64)
    for a in aligned:
        votes[np.arange(len(ref)), a] += 1
    return np.argmax(votes, axis=1).astype(np.int64)
