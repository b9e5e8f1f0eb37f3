"""Variational EM for the multi-layer stochastic blockmodel."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from ._sweep import run_estep
from .blockmodel import EPS, MLSBMParams, clamp
from .graph import MultiLayerGraph


@dataclass
class VEMOptions:
    max_iter: int = 200        # outer EM iterations
    rel_tol: float = 1e-6      # relative ELBO change
    e_tol: float = 1e-5        # largest tau change inside the E-step
    e_max_sweeps: int = 50
    # restricted M-step only
    lbfgs_memory: int = 10
    lbfgs_gtol: float = 1e-6
    lbfgs_max_iter: int = 200


@dataclass
class VariationalState:
    tau: np.ndarray
    elbo_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


@dataclass
class FitResult:
    params: MLSBMParams
    state: VariationalState
    z_hat: np.ndarray

    @property
    def elbo(self) -> float:
        return max(self.state.elbo_trace)


class DegenerateInitError(ValueError):
    pass


def hard_labels(tau: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest label."""
    return np.argmax(tau, axis=1).astype(np.int64)


def check_init(g: MultiLayerGraph, K: int, tau: np.ndarray) -> np.ndarray:
    if K > g.n_nodes:
        raise ValueError(f"K={K} exceeds the number of nodes {g.n_nodes}")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (g.n_nodes, K):
        raise ValueError(f"init_tau must have shape ({g.n_nodes}, {K})")
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise DegenerateInitError("init_tau has negative or non-finite entries")
    rows = tau.sum(axis=1)
    if np.any(rows <= 0):
        raise DegenerateInitError("init_tau has an all-zero row")
    return tau / rows[:, None]


def pair_stats(g: MultiLayerGraph, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Soft block statistics ``E[m] = tau' A_m tau / 2`` and ``W = (s s' - tau' tau) / 2``.

    ``E[m, q, l]`` is the tau-weighted edge mass over unordered pairs,
    split evenly between ``(q, l)`` and ``(l, q)``; ``W`` the same for all
    pairs. With hard labels these are the block edge and pair counts.
    """
    s = tau.sum(axis=0)
    W = 0.5 * (np.outer(s, s) - tau.T @ tau)
    E = np.stack([0.5 * (tau.T @ (g.adjacency(m) @ tau)) for m in range(g.n_layers)])
    return E, W


def _log_alpha(alpha):
    with np.errstate(divide="ignore"):
        return np.log(alpha)


def variational_objective(tau, log_alpha, E, W, log_p, log_1mp) -> float:
    """Prior + pair + entropy terms of the variational lower bound."""
    live = tau > 0
    la = np.broadcast_to(log_alpha, tau.shape)
    if np.any(live & np.isneginf(la)):
        return -np.inf
    prior = float(np.sum(tau[live] * la[live]))
    pair = float(np.sum(E * log_p + (W[None] - E) * log_1mp))
    entropy = -float(np.sum(xlogy(tau, tau)))
    return prior + pair + entropy


def elbo_mlsbm(g: MultiLayerGraph, tau: np.ndarray, alpha: np.ndarray, pi) -> float:
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    p = clamp(pi)
    E, W = pair_stats(g, tau)
    return variational_objective(tau, _log_alpha(alpha), E, W, np.log(p), np.log1p(-p))


def e_step_mlsbm(g: MultiLayerGraph, tau: np.ndarray, alpha: np.ndarray, pi,
                 opts: VEMOptions | None = None) -> np.ndarray:
    """Node-sequential fixed-point updates of ``tau`` in log space."""
    opts = opts or VEMOptions()
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    p = clamp(pi)
    tau, _ = run_estep(g, tau, _log_alpha(alpha), np.log(p), np.log1p(-p), opts.e_tol, opts.e_max_sweeps)
    return tau


def update_alpha(tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean responsibilities, with the empty-block floor; also returns the empty mask."""
    n = tau.shape[0]
    mass = tau.sum(axis=0)
    empty = mass < 1e-8
    alpha = mass / n
    if np.any(empty):
        alpha = np.where(empty, 1.0 / (10 * n), alpha)
        alpha = alpha / alpha.sum()
    return alpha, empty


def m_step_mlsbm(g: MultiLayerGraph, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``alpha`` and per-layer block densities ``pi``."""
    alpha, empty = update_alpha(tau)
    E, W = pair_stats(g, tau)
    pi = np.divide(E, W[None], out=np.zeros_like(E), where=W[None] > EPS)
    if np.any(empty):
        n = g.n_nodes
        dens = g.edge_counts / max(n * (n - 1) / 2, 1)
        for m in range(g.n_layers):
            pi[m][empty, :] = dens[m]
            pi[m][:, empty] = dens[m]
    pi = np.clip(0.5 * (pi + pi.transpose(0, 2, 1)), 0.0, 1.0)
    return alpha, pi


def fit_mlsbm(g: MultiLayerGraph, K: int, init_tau: np.ndarray, opts: VEMOptions | None = None) -> FitResult:
    """Alternate E and M steps from ``init_tau``; returns the best-ELBO iterate."""
    opts = opts or VEMOptions()
    tau = check_init(g, K, init_tau)
    alpha, pi = m_step_mlsbm(g, tau)
    elbo = elbo_mlsbm(g, tau, alpha, pi)
    state = VariationalState(tau, [elbo])
    best = (elbo, tau, alpha, pi)
    for t in range(opts.max_iter):
        tau = e_step_mlsbm(g, tau, alpha, pi, opts)
        alpha, pi = m_step_mlsbm(g, tau)
        new = elbo_mlsbm(g, tau, alpha, pi)
        state.elbo_trace.append(new)
        state.iterations = t + 1
        if new > best[0]:
            best = (new, tau, alpha, pi)
        if abs(new - elbo) <= opts.rel_tol * abs(elbo):
            state.converged = True
            break
        elbo = new
    _, tau, alpha, pi = best
    state.tau = tau
    return FitResult(MLSBMParams(pi, alpha), state, hard_labels(tau))
