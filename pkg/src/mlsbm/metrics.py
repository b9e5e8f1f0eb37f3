"""Partition agreement scores."""
from __future__ import annotations

import numpy as np
from sklearn.metrics import normalized_mutual_info_score

from .baselines import best_permutation, confusion_matrix


def _pair(z1, z2):
    z1, z2 = np.asarray(z1, dtype=np.int64), np.asarray(z2, dtype=np.int64)
    if z1.shape != z2.shape:
        raise ValueError(f"label vectors differ in length: {len(z1)} vs {len(z2)}")
    return z1, z2


def nmi(z1, z2) -> float:
    """Mutual information over the geometric mean of the two entropies (1 when both are constant)."""
    z1, z2 = _pair(z1, z2)
    return float(normalized_mutual_info_score(z1, z2, average_method="geometric"))


def _majority_matches(z_true, z_hat) -> int:
    conf = confusion_matrix(z_hat, z_true)  # rows: estimated clusters
    # argmax picks the lowest true label on ties
    return int(conf[np.arange(conf.shape[0]), np.argmax(conf, axis=1)].sum())


def ccr(z_true, z_hat) -> float:
    """Fraction of nodes whose true label is the majority true label of their estimated cluster."""
    z_true, z_hat = _pair(z_true, z_hat)
    return _majority_matches(z_true, z_hat) / len(z_true)


def misclustered_count(z_true, z_hat) -> int:
    """Nodes whose true class is not the (lowest-label tie-broken) majority in their estimated cluster."""
    z_true, z_hat = _pair(z_true, z_hat)
    return len(z_true) - _majority_matches(z_true, z_hat)


def misclustering_rate(z_true, z_hat, K: int | None = None) -> float:
    """Hamming distance minimised over label permutations, divided by N."""
    z_true, z_hat = _pair(z_true, z_hat)
    conf = confusion_matrix(z_true, z_hat, K)
    perm = best_permutation(conf)
    agree = conf[perm, np.arange(conf.shape[0])].sum()
    return float(1.0 - agree / len(z_true))
