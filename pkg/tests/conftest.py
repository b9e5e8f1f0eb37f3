import numpy as np
import pytest
from hypothesis import settings

from mlsbm.graph import MultiLayerGraph

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


def random_graph(rng, n, n_layers, density=0.3):
    """Independent Erdos-Renyi layers; returns the graph and its dense stack."""
    dense = np.zeros((n_layers, n, n), dtype=np.int64)
    for m in range(n_layers):
        upper = np.triu(rng.random((n, n)) < density, 1)
        dense[m] = upper | upper.T
    return MultiLayerGraph.from_dense(dense), dense


def two_cliques(size=8, n_layers=2):
    """Disjoint cliques on nodes ``0..size-1`` and ``size..2*size-1`` in every layer."""
    n = 2 * size
    z = np.repeat([0, 1], size)
    a = (z[:, None] == z[None, :]).astype(np.int64)
    np.fill_diagonal(a, 0)
    return MultiLayerGraph.from_dense(np.stack([a] * n_layers)), z


def random_tau(rng, n, k):
    t = rng.random((n, k)) + 0.05
    return t / t.sum(axis=1, keepdims=True)


def symmetric_probs(rng, n_layers, k, lo=0.05, hi=0.95):
    p = rng.uniform(lo, hi, size=(n_layers, k, k))
    return (p + p.transpose(0, 2, 1)) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
