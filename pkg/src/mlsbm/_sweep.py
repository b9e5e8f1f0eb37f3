"""Compiled node-by-node variational update shared by both fitters."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def estep_sweep(indptr, indices, tau, log_alpha, log_odds, log_q):
    """One in-place Gauss-Seidel pass over nodes ``0..N-1``.

    For node ``i`` the new row is the softmax over ``q`` of::

        log_alpha[q] + sum_m sum_{j != i} sum_l tau[j, l] *
            (A_ij^m * log_odds[m, q, l] + log_q[m, q, l])

    where ``log_odds = log p - log(1 - p)`` and ``log_q = log(1 - p)``.
    Each row update maximises the variational objective in that row with
    the others held fixed, so a pass never decreases it. Returns the
    largest absolute change of any entry.
    """
    n, k = tau.shape
    n_layers = indptr.shape[0]
    col = np.zeros(k)
    for i in range(n):
        for l in range(k):
            col[l] += tau[i, l]
    score = np.empty(k)
    nb = np.empty(k)
    rest = np.empty(k)
    max_change = 0.0
    for i in range(n):
        for l in range(k):
            rest[l] = col[l] - tau[i, l]
            score[l] = log_alpha[l]
        for m in range(n_layers):
            for l in range(k):
                nb[l] = 0.0
            for p in range(indptr[m, i], indptr[m, i + 1]):
                j = indices[p]
                for l in range(k):
                    nb[l] += tau[j, l]
            for q in range(k):
                acc = 0.0
                for l in range(k):
                    acc += nb[l] * log_odds[m, q, l] + rest[l] * log_q[m, q, l]
                score[q] += acc
        top = -np.inf
        for q in range(k):
            if score[q] > top:
                top = score[q]
        total = 0.0
        for q in range(k):
            score[q] = np.exp(score[q] - top)
            total += score[q]
        for q in range(k):
            new = score[q] / total
            diff = abs(new - tau[i, q])
            if diff > max_change:
                max_change = diff
            col[q] += new - tau[i, q]
            tau[i, q] = new
    return max_change


def run_estep(graph, tau: np.ndarray, log_alpha: np.ndarray, log_p: np.ndarray, log_1mp: np.ndarray,
              tol: float, max_sweeps: int) -> tuple[np.ndarray, int]:
    """Repeat sweeps until the largest entry change drops below ``tol``."""
    indptr, indices = graph.stacked_csr
    tau = np.array(tau, dtype=float, order="C")
    log_odds = np.ascontiguousarray(log_p - log_1mp)
    log_1mp = np.ascontiguousarray(log_1mp)
    la = np.ascontiguousarray(log_alpha, dtype=float)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if estep_sweep(indptr, indices, tau, la, log_odds, log_1mp) < tol:
            break
    return tau, sweeps
