"""Robust (sandwich) covariance for maximum simulated likelihood estimates."""
from __future__ import annotations

import logging
import warnings

import numpy as np

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


def hessian_from_gradient(grad, x, rel_step: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Jacobian of ``grad`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    for k in range(n):
        h = rel_step * max(abs(x[k]), 1.0)
        up, dn = x.copy(), x.copy()
        up[k] += h
        dn[k] -= h
        H[:, k] = (np.asarray(grad(up)) - np.asarray(grad(dn))) / (up[k] - dn[k])
    return 0.5 * (H + H.T)


def robust_covariance(hessian, scores) -> np.ndarray:
    """Sandwich ``H^-1 B H^-1`` with ``B`` the sum of per-individual score
    outer products.

    Parameters
    ----------
    hessian : ndarray, shape (k, k)
        Hessian of the total log-likelihood at the optimum.
    scores : ndarray, shape (n_individuals, k)
        Per-individual gradients at the optimum.
    """
    H = np.asarray(hessian, dtype=float)
    G = np.asarray(scores, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("hessian must be square")
    if G.ndim != 2 or G.shape[1] != H.shape[0]:
        raise ValueError(f"scores must have {H.shape[0]} columns")
    B = G.T @ G
    cond = np.linalg.cond(H) if H.size else 1.0
    if not np.isfinite(cond) or cond > COND_LIMIT:
        warnings.warn(f"Hessian is ill-conditioned (condition number {cond:.3g}); using a pseudo-inverse",
                      RuntimeWarning, stacklevel=2)
        Hinv = np.linalg.pinv(H)
    else:
        Hinv = np.linalg.inv(H)
    C = Hinv @ B @ Hinv
    return 0.5 * (C + C.T)


def t_ratios(estimates, covariance) -> np.ndarray:
    """Estimates over the square roots of the covariance diagonal."""
    se = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(estimates, dtype=float) / se
