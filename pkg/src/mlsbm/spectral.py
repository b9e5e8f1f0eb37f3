"""Single-layer initialisation: regularised spectral embedding, k-means,
then a one-layer variational EM refinement softened into a starting ``tau``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .graph import MultiLayerGraph
from .vem_mlsbm import VEMOptions, fit_mlsbm

DENSE_CUTOFF = 400  # below this many nodes use a dense symmetric eigensolver


class EigensolverError(RuntimeError):
    pass


@dataclass
class SpectralEmbedding:
    vectors: np.ndarray  # (N, K), columns orthonormal
    eigenvalues: np.ndarray  # sorted by decreasing magnitude


def normalized_operator(layer: MultiLayerGraph, reg: float | None = None) -> sp.csr_matrix:
    """``D_r^{-1/2} A D_r^{-1/2}`` with ``D_r = D + reg I``; ``reg`` defaults to the mean degree."""
    a = layer.adjacency(0)
    deg = np.asarray(a.sum(axis=1)).ravel()
    if reg is None:
        reg = deg.mean()
    d = deg + reg
    inv = np.divide(1.0, np.sqrt(d), out=np.zeros_like(d), where=d > 0)
    scale = sp.diags(inv)
    return (scale @ a @ scale).tocsr()


def spectral_embed(layer: MultiLayerGraph, K: int, reg: float | None = None, seed: int = 0) -> SpectralEmbedding:
    """Leading ``K`` eigenpairs (by magnitude) of the regularised normalised adjacency."""
    n = layer.n_nodes
    if K > n:
        raise ValueError("K exceeds the number of nodes")
    op = normalized_operator(layer, reg)
    if n <= DENSE_CUTOFF or K >= n - 1:
        vals, vecs = np.linalg.eigh(op.toarray())
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            vals, vecs = eigsh(op, k=K, which="LM", tol=1e-8, maxiter=10 * n, v0=v0)
        except ArpackNoConvergence as exc:
            raise EigensolverError(f"Lanczos did not converge: {exc}") from None
    order = np.argsort(-np.abs(vals), kind="stable")[:K]
    return SpectralEmbedding(vecs[:, order], vals[order])


def kmeans(embedding, K: int, restarts: int = 10, seed: int = 0) -> np.ndarray:
    """k-means++ / Lloyd on row-normalised coordinates, best of ``restarts``."""
    x = np.asarray(getattr(embedding, "vectors", embedding), dtype=float)
    if K == 1:
        return np.zeros(len(x), dtype=np.int64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    x = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=K, init="k-means++", n_init=restarts, random_state=seed).fit(x)
    return km.labels_.astype(np.int64)


def soften(z: np.ndarray, K: int, rho: float = 0.1) -> np.ndarray:
    """``1 - rho`` on the own label, ``rho / (K - 1)`` elsewhere."""
    if K == 1:
        return np.ones((len(z), 1))
    tau = np.full((len(z), K), rho / (K - 1))
    tau[np.arange(len(z)), z] = 1.0 - rho
    return tau


def spectral_init(g: MultiLayerGraph, layer_index: int, K: int, seed: int = 0, rho: float = 0.1,
                  opts: VEMOptions | None = None) -> np.ndarray:
    """Starting ``tau`` for the multi-layer fits from one layer."""
    if not 0 <= layer_index < g.n_layers:
        raise ValueError(f"layer_index {layer_index} out of range")
    n = g.n_nodes
    if K == 1:
        return np.ones((n, 1))
    layer = g.layer(layer_index)
    emb = spectral_embed(layer, K, seed=seed)
    z0 = kmeans(emb, K, seed=seed)
    refined = fit_mlsbm(layer, K, soften(z0, K, rho), opts)
    tau = soften(refined.z_hat, K, rho)
    isolated = layer.degrees()[0] == 0
    tau[isolated] = 1.0 / K
    return tau


def random_layer(n_layers: int, seed: int) -> int:
    return int(np.random.default_rng(seed).integers(n_layers))
