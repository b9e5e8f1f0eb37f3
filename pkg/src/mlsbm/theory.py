"""Half-order Rényi divergences, minimax error rates, strong-consistency
thresholds and the oracle penalised-likelihood labelling rule for
homogeneous multi-layer blockmodels with within/between probabilities
``a/N`` and ``b/N`` per layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import MultiLayerGraph

DIVERGENCE_SENTINEL = 1e12  # stands in for an infinite divergence
S_MAX = math.sqrt(5.0 / 3.0)
MODELS = ("multilayer", "aggregate")


def renyi_half(a: float, b: float, n: float) -> float:
    """Order-1/2 Rényi divergence between Bernoulli(a/n) and Bernoulli(b/n)."""
    if not (0 <= a <= n and 0 <= b <= n):
        raise ValueError(f"need 0 <= a, b <= n (got a={a}, b={b}, n={n})")
    bc = math.sqrt(a / n * b / n) + math.sqrt(1 - a / n) * math.sqrt(1 - b / n)
    if bc <= 0:
        return DIVERGENCE_SENTINEL
    return max(-2.0 * math.log(bc), 0.0)


@dataclass
class DivergenceProfile:
    per_layer: np.ndarray
    aggregate: float
    a: np.ndarray
    b: np.ndarray
    n: float


def divergence_profile(a, b, n: float) -> DivergenceProfile:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("a and b must have the same length")
    if a.sum() > n or b.sum() > n:
        raise ValueError("summed a or b exceeds n; the aggregate divergence is undefined")
    per = np.array([renyi_half(x, y, n) for x, y in zip(a, b)])
    return DivergenceProfile(per, renyi_half(a.sum(), b.sum(), n), a, b, n)


def minimax_rate(profile: DivergenceProfile, K: int, s: float = 1.0, model: str = "multilayer") -> float:
    """``exp(-N I / 2)`` for K=2 and ``exp(-N I / (s K))`` for K>=3.

    ``I`` is the summed per-layer divergence (multilayer) or the divergence
    of the summed parameters (aggregate).
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    if K < 2:
        raise ValueError("K must be at least 2")
    if not (1.0 <= s <= S_MAX):
        raise ValueError(f"s must lie in [1, sqrt(5/3)]")
    total = float(profile.per_layer.sum()) if model == "multilayer" else profile.aggregate
    denom = 2.0 if K == 2 else s * K
    return math.exp(-profile.n * total / denom)


def threshold_strong(alpha1, alpha2, K: int, model: str = "multilayer") -> tuple[bool, float]:
    """Strong-consistency margin for ``a = alpha1 log N``, ``b = alpha2 log N``; flag is ``margin > 1``."""
    a1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    a2 = np.atleast_1d(np.asarray(alpha2, dtype=float))
    if a1.shape != a2.shape or np.any(a2 < 0) or np.any(a1 < a2):
        raise ValueError("need alpha1 >= alpha2 >= 0 elementwise")
    if model == "multilayer":
        margin = float(np.sum(np.sqrt(a1) - np.sqrt(a2)) / math.sqrt(K))
    elif model == "aggregate":
        margin = float((math.sqrt(a1.sum()) - math.sqrt(a2.sum())) / math.sqrt(K))
    else:
        raise ValueError(f"model must be one of {MODELS}")
    return margin > 1.0, margin


@dataclass
class OracleWeights:
    c: np.ndarray  # per-layer edge weight
    k: np.ndarray  # per-layer pair penalty


def oracle_weights(a, b, n: float) -> OracleWeights:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(b <= 0) or np.any(a <= b) or np.any(a >= n):
        raise ValueError("need 0 < b < a < N in every layer")
    c = np.log(a * (1 - b / n) / (b * (1 - a / n)))
    k = np.log((1 - b / n) / (1 - a / n))
    return OracleWeights(c, k)


def _pair_weights(g: MultiLayerGraph, w: OracleWeights) -> np.ndarray:
    """Dense ``N x N`` matrix ``sum_m c_m A^m - k_m`` with a zero diagonal."""
    n = g.n_nodes
    out = np.full((n, n), -float(w.k.sum()))
    for m in range(g.n_layers):
        out += w.c[m] * g.adjacency(m).toarray()
    np.fill_diagonal(out, 0.0)
    return out


def oracle_T(g: MultiLayerGraph, z, a, b) -> float:
    """Penalised likelihood statistic summed over unordered same-label pairs."""
    w = oracle_weights(a, b, g.n_nodes)
    z = np.asarray(z, dtype=np.int64)
    total = 0.0
    for m, e in enumerate(g.layers):
        within_edges = int(np.sum(z[e[:, 0]] == z[e[:, 1]])) if len(e) else 0
        total += w.c[m] * within_edges
    sizes = np.bincount(z)
    within_pairs = float(np.sum(sizes * (sizes - 1) / 2))
    return float(total - w.k.sum() * within_pairs)


def canonical(z) -> np.ndarray:
    """Relabel by order of first appearance."""
    z = np.asarray(z, dtype=np.int64)
    _, first = np.unique(z, return_index=True)
    order = np.argsort(first)
    remap = np.empty(z.max() + 1, dtype=np.int64)
    remap[np.unique(z)[order]] = np.arange(len(order))
    return remap[z]


def restricted_growth_strings(n: int, K: int):
    """All labelings with ``z[0] = 0`` and each new label one above the current max, in lexicographic order."""
    z = [0] * n

    def rec(i, top):
        if i == n:
            yield tuple(z)
            return
        for v in range(min(top + 2, K)):
            z[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def _batch_T(W, labels, K):
    onehot = np.eye(K)[labels]  # (B, N, K)
    return 0.5 * np.einsum("bik,ij,bjk->b", onehot, W, onehot)


def oracle_maximize_T(g: MultiLayerGraph, a, b, K: int, mode: str = "local", seed: int = 0,
                      restarts: int = 10, budget: float = 1e6) -> np.ndarray:
    """Maximise the oracle statistic over labelings with at most ``K`` labels.

    ``exhaustive`` enumerates canonical labelings (ties go to the
    lexicographically smallest); ``local`` keeps the best of ``restarts``
    random starts improved by single-node moves until none helps.
    """
    w = oracle_weights(a, b, g.n_nodes)
    W = _pair_weights(g, w)
    n = g.n_nodes
    if mode == "exhaustive":
        if K ** n / math.factorial(K) > budget:
            raise ValueError(f"exhaustive search over K^N/K! = {K ** n / math.factorial(K):.3g} labelings exceeds budget")
        best_val, best_z = -np.inf, None
        chunk = []
        for z in restricted_growth_strings(n, K):
            chunk.append(z)
            if len(chunk) == 4096:
                best_val, best_z = _scan(W, chunk, K, best_val, best_z)
                chunk = []
        if chunk:
            best_val, best_z = _scan(W, chunk, K, best_val, best_z)
        return np.asarray(best_z, dtype=np.int64)
    if mode != "local":
        raise ValueError("mode must be 'exhaustive' or 'local'")
    rng = np.random.default_rng(seed)
    best_val, best_z = -np.inf, None
    for _ in range(restarts):
        z = _greedy(W, rng.integers(K, size=n), K)
        val = float(_batch_T(W, z[None], K)[0])
        if val > best_val + 1e-9:
            best_val, best_z = val, z
    return canonical(best_z)


def _scan(W, chunk, K, best_val, best_z):
    arr = np.asarray(chunk, dtype=np.int64)
    vals = _batch_T(W, arr, K)
    i = int(np.argmax(vals))
    if vals[i] > best_val:
        return float(vals[i]), arr[i]
    return best_val, best_z


def _greedy(W, z, K):
    z = z.copy()
    n = len(z)
    gain = W @ np.eye(K)[z]  # gain[i, q] = sum of W[i, j] over j labelled q
    moved = True
    while moved:
        moved = False
        for i in range(n):
            c = z[i]
            q = int(np.argmax(gain[i]))
            if gain[i, q] - gain[i, c] > 1e-12:
                col = W[:, i]
                gain[:, c] -= col
                gain[:, q] += col
                z[i] = q
                moved = True
    return z
