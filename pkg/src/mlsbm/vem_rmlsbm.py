"""Variational EM for the restricted multi-layer blockmodel (logit link).

The M-step maximises the variational bound over ``(pi, beta)`` with
L-BFGS, warm-started from the previous iterate. Because the bound depends
on ``pi_ql + beta_m`` only, the optimizer runs unconstrained and the
result is recentred to ``sum(beta) = 0`` afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._sweep import run_estep
from .blockmodel import RestrictedObjective, RMLSBMParams, box_limit, log_sigmoid, moment_start
from .graph import MultiLayerGraph
from .lbfgs import LBFGSOptions, LBFGSResult
from .vem_mlsbm import (VariationalState, VEMOptions, _log_alpha, check_init, hard_labels, pair_stats,
                        update_alpha, variational_objective)


@dataclass
class RmlsbmFitResult:
    params: RMLSBMParams
    alpha: np.ndarray
    state: VariationalState
    z_hat: np.ndarray

    @property
    def elbo(self) -> float:
        return max(self.state.elbo_trace)


@dataclass
class GradientRecord:
    """Gradient of the restricted bound: upper-triangle ``pi`` entries (row-major) then ``beta``."""

    pi: np.ndarray
    beta: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.pi, self.beta])


def _lbfgs_opts(opts: VEMOptions) -> LBFGSOptions:
    return LBFGSOptions(memory=opts.lbfgs_memory, gtol=opts.lbfgs_gtol, max_iter=opts.lbfgs_max_iter)


def elbo_rmlsbm(g: MultiLayerGraph, tau: np.ndarray, alpha: np.ndarray, params: RMLSBMParams) -> float:
    eta = params.linear_predictor()
    E, W = pair_stats(g, tau)
    return variational_objective(tau, _log_alpha(alpha), E, W, log_sigmoid(eta), log_sigmoid(-eta))


def e_step_rmlsbm(g: MultiLayerGraph, tau: np.ndarray, alpha: np.ndarray, params: RMLSBMParams,
                  opts: VEMOptions | None = None) -> np.ndarray:
    opts = opts or VEMOptions()
    eta = params.linear_predictor()
    tau, _ = run_estep(g, tau, _log_alpha(alpha), log_sigmoid(eta), log_sigmoid(-eta),
                       opts.e_tol, opts.e_max_sweeps)
    return tau


def m_step_gradients(g: MultiLayerGraph, tau: np.ndarray, params: RMLSBMParams) -> GradientRecord:
    E, W = pair_stats(g, tau)
    gp, gb = RestrictedObjective(E, W).gradient(params)
    return GradientRecord(gp, gb)


def initial_params(g: MultiLayerGraph, tau: np.ndarray) -> RMLSBMParams:
    E, W = pair_stats(g, tau)
    return moment_start(E, W, box_limit(g.n_layers, g.n_nodes))


def m_step_rmlsbm(g: MultiLayerGraph, tau: np.ndarray, warm: RMLSBMParams | None = None,
                  opts: VEMOptions | None = None) -> tuple[np.ndarray, RMLSBMParams, LBFGSResult]:
    """Closed-form ``alpha``; ``(pi, beta)`` by L-BFGS. Also returns the optimizer record."""
    opts = opts or VEMOptions()
    alpha, _ = update_alpha(tau)
    E, W = pair_stats(g, tau)
    limit = box_limit(g.n_layers, g.n_nodes)
    if warm is None:
        warm = moment_start(E, W, limit)
    params, res = RestrictedObjective(E, W).maximize(warm, limit, _lbfgs_opts(opts))
    return alpha, params, res


def fit_rmlsbm(g: MultiLayerGraph, K: int, init_tau: np.ndarray, opts: VEMOptions | None = None,
               init_params: RMLSBMParams | None = None) -> RmlsbmFitResult:
    """Restricted-model variational EM from ``init_tau``; returns the best-ELBO iterate."""
    opts = opts or VEMOptions()
    tau = check_init(g, K, init_tau)
    alpha, params, _ = m_step_rmlsbm(g, tau, init_params, opts)
    elbo = elbo_rmlsbm(g, tau, alpha, params)
    state = VariationalState(tau, [elbo])
    best = (elbo, tau, alpha, params)
    for t in range(opts.max_iter):
        tau = e_step_rmlsbm(g, tau, alpha, params, opts)
        alpha, params, _ = m_step_rmlsbm(g, tau, params, opts)
        new = elbo_rmlsbm(g, tau, alpha, params)
        state.elbo_trace.append(new)
        state.iterations = t + 1
        if new > best[0]:
            best = (new, tau, alpha, params)
        if abs(new - elbo) <= opts.rel_tol * abs(elbo):
            state.converged = True
            break
        elbo = new
    _, tau, alpha, params = best
    state.tau = tau
    return RmlsbmFitResult(params, alpha, state, hard_labels(tau))
