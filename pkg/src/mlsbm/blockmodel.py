"""Blockmodel likelihoods, closed-form and restricted MLEs, and the
likelihood decomposition identities.

Conventions used throughout:

* labels are 0-based integer arrays;
* probabilities are clamped to ``[EPS, 1 - EPS]`` before any log, except in
  the profile (maximised) likelihoods where ``0 log 0 = 0`` is applied
  exactly;
* block statistics are symmetric ``K x K`` arrays whose diagonal counts
  within-block pairs and whose ``(q, l)`` off-diagonal counts pairs
  between blocks ``q`` and ``l`` (each pair once).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from .graph import MultiLayerGraph
from .lbfgs import LBFGSOptions, LBFGSResult, minimize

log = logging.getLogger(__name__)

EPS = 1e-12
BOX_C = 1.0


def clamp(p):
    return np.clip(p, EPS, 1.0 - EPS)


def logit(p):
    p = clamp(np.asarray(p, dtype=float))
    return np.log(p) - np.log1p(-p)


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


# --------------------------------------------------------------------------
# parameter containers


@dataclass(eq=False)
class MLSBMParams:
    """Per-layer block probabilities ``pi`` of shape ``(M, K, K)`` and class weights ``alpha``."""

    pi: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.pi.ndim != 3 or self.pi.shape[1] != self.pi.shape[2]:
            raise ValueError("pi must have shape (M, K, K)")
        if self.alpha.shape != (self.pi.shape[1],):
            raise ValueError("alpha must have length K")
        if np.any(self.pi < 0) or np.any(self.pi > 1):
            raise ValueError("pi entries must lie in [0, 1]")
        if not np.allclose(self.pi, self.pi.transpose(0, 2, 1)):
            raise ValueError("pi slices must be symmetric")
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1) > 1e-9:
            raise ValueError("alpha must lie on the simplex")

    @property
    def K(self) -> int:
        return self.pi.shape[1]

    @property
    def M(self) -> int:
        return self.pi.shape[0]


@dataclass(eq=False)
class RMLSBMParams:
    """Logit-scale community matrix ``pi`` (K x K) and layer offsets ``beta`` (M)."""

    pi: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.pi.ndim != 2 or self.pi.shape[0] != self.pi.shape[1]:
            raise ValueError("pi must be square")
        if not np.allclose(self.pi, self.pi.T):
            raise ValueError("pi must be symmetric")

    @property
    def K(self) -> int:
        return self.pi.shape[0]

    @property
    def M(self) -> int:
        return len(self.beta)

    @staticmethod
    def n_free(K: int, M: int) -> int:
        """Free parameters after the sum-to-zero constraint on ``beta``."""
        return K * (K + 1) // 2 + M - 1

    def linear_predictor(self) -> np.ndarray:
        return self.pi[None, :, :] + self.beta[:, None, None]

    def phi(self) -> np.ndarray:
        """``(M, K, K)`` edge probabilities ``expit(pi_ql + beta_m)``."""
        return expit(self.linear_predictor())

    def normalized(self, limit: float) -> "RMLSBMParams":
        """Shift so that ``sum(beta) == 0`` and clip everything to ``[-limit, limit]``."""
        pi, beta = self.pi.copy(), self.beta.copy()
        c = beta.mean()
        pi += c
        beta -= c
        if np.any(np.abs(beta) > limit):
            # shift c solving sum(clip(beta - c)) = 0, found by bisection
            lo, hi = beta.min() - limit, beta.max() + limit
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if np.clip(beta - mid, -limit, limit).sum() > 0:
                    lo = mid
                else:
                    hi = mid
            c = 0.5 * (lo + hi)
            beta = np.clip(beta - c, -limit, limit)
            beta -= beta.mean()
            pi += c
        return RMLSBMParams(np.clip(pi, -limit, limit), beta)


def box_limit(M: int, N: int, C: float = BOX_C) -> float:
    return C * np.log(M * N * N)


def phi_transform(pi_ql, beta_m):
    """Inverse-logit of ``pi_ql + beta_m``, overflow-safe."""
    return expit(np.add(pi_ql, beta_m))


# --------------------------------------------------------------------------
# counts and closed forms


@dataclass(eq=False)
class BlockCounts:
    class_sizes: np.ndarray
    pair_counts: np.ndarray


def _check_labels(z, K):
    z = np.asarray(z, dtype=np.int64)
    if z.size and (z.min() < 0 or z.max() >= K):
        raise ValueError(f"labels must lie in 0..{K - 1}")
    return z


def block_counts(z, K: int) -> BlockCounts:
    z = _check_labels(z, K)
    sizes = np.bincount(z, minlength=K).astype(np.int64)
    pairs = np.outer(sizes, sizes)
    np.fill_diagonal(pairs, sizes * (sizes - 1) // 2)
    return BlockCounts(sizes, pairs)


def block_edge_counts(g: MultiLayerGraph, z, K: int) -> np.ndarray:
    """``(M, K, K)`` symmetric edge counts per block pair."""
    z = _check_labels(z, K)
    out = np.zeros((g.n_layers, K, K))
    for m, e in enumerate(g.layers):
        if len(e):
            np.add.at(out[m], (z[e[:, 0]], z[e[:, 1]]), 1.0)
        out[m] = out[m] + out[m].T - np.diag(np.diag(out[m]))
    return out


def block_sums(P: np.ndarray, z, K: int) -> np.ndarray:
    """``(M, K, K)`` sums of ``P_ij`` over unordered pairs ``i<j`` per block pair."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 2:
        P = P[None]
    z = _check_labels(z, K)
    onehot = np.eye(K)[z]
    out = np.empty((P.shape[0], K, K))
    for m, pm in enumerate(P):
        pm = pm - np.diag(np.diag(pm))
        s = onehot.T @ pm @ onehot  # ordered pairs i != j
        out[m] = s
        out[m][np.diag_indices(K)] = np.diag(s) / 2.0
    return out


def _safe_ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def mle_pi_hat(g: MultiLayerGraph, z, K: int) -> np.ndarray:
    e = block_edge_counts(g, z, K)
    n = block_counts(z, K).pair_counts
    return _safe_ratio(e, np.broadcast_to(n, e.shape).astype(float))


def pi_bar(P: np.ndarray, z, K: int) -> np.ndarray:
    s = block_sums(P, z, K)
    n = block_counts(z, K).pair_counts
    return _safe_ratio(s, np.broadcast_to(n, s.shape).astype(float))


def bernoulli_kl(a, b):
    """KL divergence between Bernoulli(a) and Bernoulli(b), both clamped."""
    a, b = clamp(np.asarray(a, dtype=float)), clamp(np.asarray(b, dtype=float))
    out = a * np.log(a / b) + (1 - a) * np.log((1 - a) / (1 - b))
    return np.maximum(out, 0.0) if np.ndim(out) else max(float(out), 0.0)


def _upper(x):
    """Sum over ``q <= l`` of a symmetric ``(..., K, K)`` array."""
    K = x.shape[-1]
    return x[..., np.triu_indices(K)[0], np.triu_indices(K)[1]].sum(axis=-1)


def _pi_array(pi):
    return np.asarray(getattr(pi, "pi", pi), dtype=float)


def _loglik_from_stats(edges, pairs, pi):
    p = clamp(pi)
    terms = xlogy(edges, p) + xlogy(pairs - edges, 1 - p)
    return float(_upper(terms).sum())


def log_likelihood_mlsbm(g: MultiLayerGraph, z, pi) -> float:
    """Bernoulli log likelihood of all layers given labels and block probabilities."""
    pi = _pi_array(pi)
    K = pi.shape[-1]
    e = block_edge_counts(g, z, K)
    n = block_counts(z, K).pair_counts
    return _loglik_from_stats(e, np.broadcast_to(n, e.shape), pi)


def _entropy_form(phat, n):
    """``sum_{q<=l} n_ql [p log p + (1-p) log(1-p)]`` with ``0 log 0 = 0``."""
    return float(_upper(n * (xlogy(phat, phat) + xlogy(1 - phat, 1 - phat))).sum())


def profile_log_likelihood(g: MultiLayerGraph, z, K: int) -> float:
    n = block_counts(z, K).pair_counts
    return _entropy_form(mle_pi_hat(g, z, K), n)


def expected_log_likelihood(P: np.ndarray, z, pi) -> float:
    pi = _pi_array(pi)
    K = pi.shape[-1]
    s = block_sums(P, z, K)
    n = block_counts(z, K).pair_counts
    return _loglik_from_stats(s, np.broadcast_to(n, s.shape), pi)


def decomposition_residual(g: MultiLayerGraph, P: np.ndarray, z, K: int) -> float:
    """Gap in ``l(A;z) - lbar_P(z) = sum n KL(pihat || pibar) + X - E[X]``."""
    n = block_counts(z, K).pair_counts
    phat = mle_pi_hat(g, z, K)
    pbar = pi_bar(P, z, K)
    lhs = _entropy_form(phat, n) - _entropy_form(pbar, n)
    kl = float(_upper(n * bernoulli_kl(phat, pbar)).sum())
    lo = logit(pbar)
    x = float(_upper(block_edge_counts(g, z, K) * lo).sum())
    ex = float(_upper(block_sums(P, z, K) * lo).sum())
    return abs(lhs - (kl + x - ex))


# --------------------------------------------------------------------------
# restricted model


class RestrictedObjective:
    """Concave objective ``sum_m sum_{q,l} E[m,q,l] eta - W[q,l] log(1 + e^eta)``.

    ``eta = pi_ql + beta_m``. ``E`` and ``W`` are symmetric and weight
    each unordered block pair half on ``(q,l)`` and half on ``(l,q)``, so
    hard-label statistics and the soft-label variational statistics share
    one code path. The free parameters are the upper triangle of ``pi``
    (row-major, diagonal included) followed by ``beta``.
    """

    def __init__(self, E: np.ndarray, W: np.ndarray):
        self.E = np.asarray(E, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.M, self.K = self.E.shape[0], self.E.shape[1]
        self.iu = np.triu_indices(self.K)
        self._offdiag = np.where(self.iu[0] == self.iu[1], 1.0, 2.0)

    def pack(self, params: RMLSBMParams) -> np.ndarray:
        return np.concatenate([params.pi[self.iu], params.beta])

    def unpack(self, x: np.ndarray) -> RMLSBMParams:
        n_pi = len(self.iu[0])
        pi = np.zeros((self.K, self.K))
        pi[self.iu] = x[:n_pi]
        pi = pi + pi.T - np.diag(np.diag(pi))
        return RMLSBMParams(pi, np.array(x[n_pi:]))

    def value(self, params: RMLSBMParams) -> float:
        eta = params.linear_predictor()
        return float(np.sum(self.E * eta - self.W * np.logaddexp(0.0, eta)))

    def gradient(self, params: RMLSBMParams) -> tuple[np.ndarray, np.ndarray]:
        """Derivatives in the free upper-triangle ``pi`` entries and in ``beta``."""
        resid = self.E - self.W * params.phi()
        g_full = resid.sum(axis=0)
        return g_full[self.iu] * self._offdiag, resid.sum(axis=(1, 2))

    def neg(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        # hot path of the optimizer: skips RMLSBMParams validation
        n_pi = len(self.iu[0])
        pi = np.empty((self.K, self.K))
        pi[self.iu] = x[:n_pi]
        pi.T[self.iu] = x[:n_pi]
        eta = pi[None] + x[n_pi:, None, None]
        resid = self.E - self.W * expit(eta)
        val = float(np.sum(self.E * eta - self.W * np.logaddexp(0.0, eta)))
        return -val, -np.concatenate([resid.sum(axis=0)[self.iu] * self._offdiag, resid.sum(axis=(1, 2))])

    def maximize(self, warm: RMLSBMParams, limit: float,
                 opts: LBFGSOptions | None = None) -> tuple[RMLSBMParams, LBFGSResult]:
        """L-BFGS from ``warm``; result is recentred, box-clipped and never worse than ``warm``."""
        start = warm.normalized(limit)
        res = minimize(self.neg, self.pack(start), opts)
        cand = self.unpack(res.x).normalized(limit)
        if self.value(cand) < self.value(start):
            cand = start
        if not res.converged:
            log.debug("restricted M-step: %s after %d iterations", res.message, res.n_iter)
        return cand, res


def hard_stats(g: MultiLayerGraph, z, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-weighted ``(E, W)`` for hard labels (see :class:`RestrictedObjective`)."""
    half = np.where(np.eye(K, dtype=bool), 1.0, 0.5)
    e = block_edge_counts(g, z, K) * half
    n = block_counts(z, K).pair_counts * half
    return e, n


def moment_start(E: np.ndarray, W: np.ndarray, limit: float) -> RMLSBMParams:
    """Logit of layer-averaged block means for ``pi``; logit layer densities for ``beta``."""
    pi_m = _safe_ratio(E, np.broadcast_to(W, E.shape).astype(float))
    pi = logit(pi_m.mean(axis=0))
    tot = W.sum()
    dens = E.sum(axis=(1, 2)) / tot if tot > 0 else np.full(E.shape[0], 0.5)
    beta = logit(dens)
    beta = beta - beta.mean()
    return RMLSBMParams(pi, beta).normalized(limit)


def rmle_fixed_z(g: MultiLayerGraph, z, K: int, opts: LBFGSOptions | None = None,
                 warm: RMLSBMParams | None = None) -> tuple[RMLSBMParams, LBFGSResult]:
    """Restricted MLE of ``(pi, beta)`` for fixed labels.

    Returns the parameters and the optimizer record; ``record.converged``
    is False when the iteration budget ran out (e.g. a block with no
    edges pushes its logit towards the box edge).
    """
    E, W = hard_stats(g, z, K)
    limit = box_limit(g.n_layers, g.n_nodes)
    obj = RestrictedObjective(E, W)
    start = warm if warm is not None else moment_start(E, W, limit)
    return obj.maximize(start, limit, opts)


def restricted_log_likelihood(g: MultiLayerGraph, z, params: RMLSBMParams) -> float:
    E, W = hard_stats(g, z, params.K)
    return RestrictedObjective(E, W).value(params)


def estimating_residuals(g: MultiLayerGraph, z, params: RMLSBMParams) -> np.ndarray:
    """Score-equation gaps: ``M`` layer equations then ``K(K+1)/2`` block equations.

    Layer ``m``: ``(sum_{q<=l} n_ql phi^m_ql - edges_m) / sum_{q<=l} n_ql``.
    Block ``(q,l)``: ``(sum_m n_ql phi^m_ql - sum_m e^m_ql) / (M n_ql)``,
    zero when the block is empty.
    """
    K, M = params.K, params.M
    e = block_edge_counts(g, z, K)
    n = block_counts(z, K).pair_counts.astype(float)
    model = n[None] * params.phi()
    iu = np.triu_indices(K)
    layer_gap = _upper(model - e) / max(_upper(n), 1.0)
    block_gap = _safe_ratio((model - e).sum(axis=0)[iu], M * n[iu])
    return np.concatenate([layer_gap, block_gap])


def _expected_restricted(P, z, K, limit, opts):
    s = block_sums(P, z, K)
    half = np.where(np.eye(K, dtype=bool), 1.0, 0.5)
    E, W = s * half, block_counts(z, K).pair_counts * half
    obj = RestrictedObjective(E, W)
    params, res = obj.maximize(moment_start(E, W, limit), limit, opts)
    return params, res


def decomposition_residual_restricted(g: MultiLayerGraph, P: np.ndarray, z, K: int,
                                      opts: LBFGSOptions | None = None) -> float:
    """Restricted analogue of :func:`decomposition_residual`, with ``phi`` from restricted fits.

    Exact only when both restricted fits satisfy their score equations.
    """
    opts = opts or LBFGSOptions(gtol=1e-11, max_iter=2000)
    limit = box_limit(g.n_layers, g.n_nodes)
    hat, _ = rmle_fixed_z(g, z, K, opts)
    bar, _ = _expected_restricted(P, z, K, limit, opts)
    n = block_counts(z, K).pair_counts
    phat, pbar = hat.phi(), bar.phi()
    e = block_edge_counts(g, z, K)
    s = block_sums(P, z, K)
    nb = np.broadcast_to(n, e.shape)
    lhs = _loglik_from_stats(e, nb, phat) - _loglik_from_stats(s, nb, pbar)
    kl = float(_upper(n * bernoulli_kl(phat, pbar)).sum())
    lo = bar.linear_predictor()
    x = float(_upper(e * lo).sum())
    ex = float(_upper(s * lo).sum())
    return abs(lhs - (kl + x - ex))
