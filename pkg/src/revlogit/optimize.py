"""BFGS maximization with a backtracking line search."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    converged: bool
    n_iter: int
    n_eval: int
    message: str

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def central_gradient(fun: Callable[[np.ndarray], float], x, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step ``rel_step * max(|x_k|, 1)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        up, dn = x.copy(), x.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (fun(up) - fun(dn)) / (up[k] - dn[k])
    return g


def relative_gradient(g, x, f) -> float:
    """Scale-free gradient size: ``max_k |g_k| max(|x_k|, 1) / max(|f|, 1)``."""
    if g.size == 0:
        return 0.0
    return float(np.max(np.abs(g) * np.maximum(np.abs(x), 1.0)) / max(abs(f), 1.0))


def maximize(fun, x0, *, grad=None, max_iter: int = 1000, gtol: float = 1e-6, xtol: float = 1e-8,
             max_halvings: int = 40, callback=None) -> OptimizeResult:
    """Maximize ``fun`` by BFGS.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> float``; or, when ``grad is True``, ``fun(x) -> (float, ndarray)``.
    grad : callable, True or None
        Analytic gradient. ``None`` uses central differences.
    gtol : float
        Convergence when :func:`relative_gradient` falls below this.
    xtol : float
        Stop when the accepted step is below this (relative to ``max(|x|, 1)``);
        this counts as convergence only if the relative gradient is below
        ``10 * gtol``.

    Returns
    -------
    OptimizeResult
        ``converged`` is False when ``max_iter`` is exhausted or no ascent
        step can be found away from a stationary point.
    """
    n_eval = 0

    def evaluate(x):
        nonlocal n_eval
        n_eval += 1
        if grad is True:
            f, g = fun(x)
        else:
            f = fun(x)
            g = None
        f = float(f)
        if not np.isfinite(f):
            return f, None
        if g is None:
            g = grad(x) if callable(grad) else central_gradient(fun, x)
        return f, np.asarray(g, dtype=float)

    x = np.asarray(x0, dtype=float).copy()
    f, g = evaluate(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    n = x.size
    Hinv = np.eye(n)
    scaled = False
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if relative_gradient(g, x, f) < gtol:
            converged, message = True, "relative gradient below tolerance"
            it -= 1
            break
        p = Hinv @ g
        if g @ p <= 0:
            Hinv = np.eye(n)
            p = g.copy()
        step = 1.0
        slope = g @ p
        accepted = False
        for _ in range(max_halvings):
            x_new = x + step * p
            f_new, g_new = evaluate(x_new)
            if np.isfinite(f_new) and f_new >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not np.allclose(Hinv, np.eye(n)):
                Hinv = np.eye(n)
                continue
            converged = relative_gradient(g, x, f) < 1e3 * gtol
            message = "line search failed" + (" near a stationary point" if converged else "")
            break
        s = x_new - x
        y = g - g_new  # gradient change of the minimized objective -fun
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                Hinv = np.eye(n) * (sy / (y @ y))
                scaled = True
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = (Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * (y @ Hy) + rho) * np.outer(s, s))
        small_step = np.max(np.abs(s) / np.maximum(np.abs(x), 1.0)) < xtol
        x, f, g = x_new, f_new, g_new
        if callback is not None:
            callback(it, x, f, g)
        logger.debug("iter %d  f=%.10g  relgrad=%.3g", it, f, relative_gradient(g, x, f))
        if small_step:
            converged = relative_gradient(g, x, f) < 10 * gtol
            message = "parameter step below tolerance" + ("" if converged else " with the gradient above it")
            break
    return OptimizeResult(x, f, g, converged, it, n_eval, message)
