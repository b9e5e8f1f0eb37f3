"""Limited-memory BFGS with a backtracking Armijo line search."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LBFGSOptions:
    memory: int = 10
    gtol: float = 1e-6  # on the gradient infinity-norm
    max_iter: int = 200
    c1: float = 1e-4
    max_backtracks: int = 60
    noise: float = 16 * np.finfo(float).eps  # relative size of rounding noise in f


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0: np.ndarray,
             opts: LBFGSOptions | None = None) -> LBFGSResult:
    """Minimise ``fun`` which returns ``(value, gradient)``.

    A step is accepted under the Armijo condition or, once the predicted
    decrease is lost in rounding, when ``f`` stays within ``noise`` of its
    current value and the directional derivative shrinks in magnitude
    (an approximate Wolfe test). The returned value therefore never exceeds
    ``fun(x0)`` by more than rounding. Curvature pairs with ``s.y <= 0``
    are skipped.
    """
    opts = opts or LBFGSOptions()
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    s_hist: deque = deque(maxlen=opts.memory)
    y_hist: deque = deque(maxlen=opts.memory)
    for it in range(opts.max_iter + 1):
        gnorm = np.max(np.abs(g)) if g.size else 0.0
        if gnorm <= opts.gtol:
            return LBFGSResult(x, f, g, it, True, "gradient tolerance reached")
        if it == opts.max_iter:
            break
        d = -_two_loop(g, list(s_hist), list(y_hist))
        slope = g @ d
        if not np.isfinite(slope) or slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = g @ d
        step = 1.0 if s_hist else min(1.0, 1.0 / gnorm)
        for _ in range(opts.max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new):
                if f_new <= f + opts.c1 * step * slope:
                    break
                tol_f = opts.noise * (abs(f) + 1.0)
                if f_new <= f + tol_f and abs(g_new @ d) <= (1 - 2 * opts.c1) * abs(slope):
                    break
            step *= 0.5
        else:
            return LBFGSResult(x, f, g, it, False, "line search failed")
        s = x_new - x
        y = g_new - g
        if s @ y > 1e-12 * np.sqrt((s @ s) * (y @ y)):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g = x_new, f_new, g_new
    return LBFGSResult(x, f, g, opts.max_iter, False, "iteration budget exhausted")
