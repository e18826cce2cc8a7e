"""Simulated log-likelihood of the panel and its per-individual scores.

For each individual the product of ordered-logit probabilities over the
observed (stakeholder, time) cells is averaged over draws in log space::

    ln L_i = logsumexp_q( sum_{s,t} ln P(y_ist | draw q) ) - ln Q

Scores are analytic and taken with respect to the free parameter vector of
:class:`~revlogit.params.ParameterStructure`.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import STAKEHOLDERS
from .design import DesignMatrices
from .draws import DrawMatrix
from .model import (
    decay_from_exponent,
    individual_alpha,
    individual_reversion,
    ordered_logit_terms,
    ordered_probs,
    workshop_multiplier,
)
from .params import ParameterStructure, ParameterVector

logger = logging.getLogger(__name__)

LOG_FLOOR = np.log(1e-300)
# Grid cells (individual x draw x time x stakeholder) per work unit. Fixed so
# results do not depend on the number of threads.
CHUNK_CELLS = 1 << 20


@dataclass
class LoglikResult:
    total: float
    per_individual: np.ndarray
    scores: np.ndarray | None = None
    n_floored: int = 0
    n_nonpositive_alpha: int = 0

    @property
    def gradient(self):
        return None if self.scores is None else self.scores.sum(axis=0)


class LikelihoodEngine:
    """Evaluate the simulated log-likelihood for one design and draw set.

    Parameters
    ----------
    design : DesignMatrices
    draws : DrawMatrix, optional
        Needed when the configuration has random components; must have one
        row per individual and one column per random component.
    threads : int
        Worker threads; the result is identical for any value.
    """

    def __init__(self, design: DesignMatrices, draws: DrawMatrix | None = None, threads: int = 1):
        self.design = design
        self.structure = ParameterStructure.from_design(design)
        K = self.structure.n_random
        N = design.n_individuals
        if K == 0:
            self.z = np.zeros((N, 1, 0))
        else:
            if draws is None:
                raise ValueError("draws are required when random components are active")
            if draws.n_individuals != N or draws.n_dims != K:
                raise ValueError(
                    f"draws have shape {draws.shape}; need ({N}, Q, {K}) for this design"
                )
            self.z = draws.values
        self.threads = max(1, int(threads))
        per = self.z.shape[1] * design.ratings.shape[1] * design.ratings.shape[2]
        step = max(1, CHUNK_CELLS // per)
        self._chunks = [slice(a, min(a + step, N)) for a in range(0, N, step)]

    @property
    def n_draws(self) -> int:
        return self.z.shape[1]

    def _map(self, fn):
        if self.threads == 1 or len(self._chunks) == 1:
            return [fn(c) for c in self._chunks]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, self._chunks))

    # ------------------------------------------------------------------

    def _predictor(self, sl, p: ParameterVector, derivatives: bool = True):
        """Latent predictor on the (n, Q, T, S) grid plus intermediates.

        Without ``derivatives`` the decay derivative slot is ``None``.
        """
        d, st = self.design, self.structure
        dims = st.random_dims
        z = self.z[sl]
        n, Q = z.shape[0], z.shape[1]

        def draw(key):
            return z[:, :, dims[key]] if key in dims else np.zeros((n, 1))

        if st.reversion:
            rho = individual_reversion(p.reversion_base, p.reversion_effects,
                                       d.reversion_x[sl][:, None, :], p.reversion_sd, draw("reversion"))
            alpha = individual_alpha(p.alpha_base, p.alpha_effects,
                                     d.alpha_x[sl][:, None, :], p.alpha_sd, draw("alpha"))
            rho = np.broadcast_to(rho, (n, Q))
            alpha = np.broadcast_to(alpha, (n, Q))
            exponent = d.exponent[d.wave_index[sl]][:, None]
            dec, ddec = decay_from_exponent(exponent, alpha[:, :, None, None], derivative=derivatives)
        else:
            rho = alpha = np.zeros((n, Q))
            dec = ddec = np.zeros((n, 1) + d.indicators.shape)
        mult = np.broadcast_to(workshop_multiplier(d.indicators, dec, rho[:, :, None]),
                               (n, Q) + d.indicators.shape)
        W = mult.shape[-1]
        v = (np.ascontiguousarray(mult).reshape(-1, W) @ p.workshop_effects.T).reshape(mult.shape[:-1] + (-1,))

        offset = d.wave_dummies[sl] @ p.wave_shifts.T
        for s, x in enumerate(d.stakeholder_x):
            if x.shape[1]:
                offset[:, s] += x[sl] @ p.demographic_effects[s]
        cal = np.concatenate([[0.0], p.calendar_effects])[d.periods[sl]]
        v += offset[:, None, None, :]
        v += cal[:, None]
        for s, name in enumerate(STAKEHOLDERS):
            if name in dims:
                v[..., s] += p.stakeholder_sd[s] * z[:, :, None, dims[name]]
        if "common" in dims:
            v += p.common_sd * z[:, :, dims["common"], None, None]
        return v, mult, dec, ddec, rho, alpha

    def _bounds(self, sl, thresholds):
        y = self.design.ratings[sl]
        mask = y >= 0
        yy = np.where(mask, y, 0)
        S = thresholds.shape[0]
        padded = np.column_stack([np.full(S, -np.inf), thresholds, np.full(S, np.inf)])
        cols = np.arange(S)
        return padded[cols, yy], padded[cols, yy + 1], mask, yy

    def _chunk(self, sl, theta, p, want_scores):
        # Extreme trial points can push whole categories beyond double range;
        # those draws get zero weight and their non-finite terms are zeroed.
        with np.errstate(all="ignore"):
            return self._chunk_terms(sl, theta, p, want_scores)

    def _chunk_terms(self, sl, theta, p, want_scores):
        d, st = self.design, self.structure
        idx = st.index
        v, mult, dec, ddec, rho, alpha = self._predictor(sl, p, derivatives=want_scores)
        n, Q, T, S = v.shape
        lower, upper, mask, yy = self._bounds(sl, p.thresholds)
        logp, g_v, g_lo, g_up = ordered_logit_terms(v, lower[:, None], upper[:, None], derivatives=want_scores)
        m4 = mask[:, None]
        logp = np.where(m4, logp, 0.0)
        ll_q = logp.sum(axis=(2, 3))
        top = ll_q.max(axis=1)
        lse = top + np.log(np.exp(ll_q - top[:, None]).sum(axis=1))
        ll = lse - np.log(Q)
        bad = ~np.isfinite(ll)
        ll[bad] = LOG_FLOOR
        n_nonpos = int(np.any(alpha <= 0, axis=1).sum()) if st.reversion else 0
        if not want_scores:
            return ll, None, int(bad.sum()), n_nonpos

        w = np.exp(ll_q - lse[:, None])
        w[bad] = 0.0
        w4 = w[:, :, None, None]
        G = np.where(m4, g_v, 0.0) * w4
        clean = _zero_nonfinite if not np.isfinite(ll_q).all() else (lambda a: a)
        G = clean(G)
        grad = np.zeros((n, st.n_free))

        W = mult.shape[-1]
        grad[:, idx["workshop"]] = np.matmul(G.reshape(n, Q * T, S).transpose(0, 2, 1),
                                             np.ascontiguousarray(mult).reshape(n, Q * T, W))
        H = G.sum(axis=(1, 2))
        grad[:, idx["wave"]] = H[:, :, None] * d.wave_dummies[sl][:, None, :]
        for s, x in enumerate(d.stakeholder_x):
            if x.shape[1]:
                grad[:, idx["gamma"][s]] = H[:, s, None] * x[sl]

        # thresholds: accumulate d/d(cut point) then chain through the gap parametrization
        u_lo = clean(np.where(m4, g_lo, 0.0) * w4).sum(axis=1)
        u_up = clean(np.where(m4, g_up, 0.0) * w4).sum(axis=1)
        ii = np.arange(n)[:, None, None]
        ss = np.arange(S)[None, None, :]
        base = (ii * S + ss) * 12
        size = n * S * 12
        gcut = (np.bincount((base + yy).ravel(), weights=u_lo.ravel(), minlength=size)
                + np.bincount((base + yy + 1).ravel(), weights=u_up.ravel(), minlength=size))
        gtau = gcut.reshape(n, S, 12)[:, :, 1:11]
        tail = np.cumsum(gtau[:, :, ::-1], axis=2)[:, :, ::-1]
        raw = theta[idx["tau"]]
        scale = np.column_stack([np.ones(S), np.exp(raw[:, 1:])])
        grad[:, idx["tau"]] = tail * scale[None]

        dims = st.random_dims
        z = self.z[sl]

        def sd_sign(pos):
            return 1.0 if theta[pos] >= 0 else -1.0

        if st.reversion:
            beta = p.workshop_effects
            k_rho = (G * (-(dec @ beta.T))).sum(axis=(2, 3))
            k_alpha = (G * (-(rho[:, :, None, None] * (ddec @ beta.T)))).sum(axis=(2, 3))
            for key, k, xs, base_key, eff_key, sd_key in (
                    ("reversion", k_rho, d.reversion_x, "rho_base", "rho_effects", "rho_sd"),
                    ("alpha", k_alpha, d.alpha_x, "alpha_base", "alpha_effects", "alpha_sd")):
                tot = k.sum(axis=1)
                grad[:, idx[base_key]] = tot[:, None]
                if len(idx[eff_key]):
                    grad[:, idx[eff_key]] = tot[:, None] * xs[sl]
                if key in dims:
                    pos = idx[sd_key][0]
                    grad[:, pos] = (k * z[:, :, dims[key]]).sum(axis=1) * sd_sign(pos)

        for s, name in enumerate(STAKEHOLDERS):
            if name in dims:
                pos = idx["stakeholder_sd"][s]
                grad[:, pos] = (G[..., s].sum(axis=2) * z[:, :, dims[name]]).sum(axis=1) * sd_sign(pos)
        if "common" in dims:
            pos = idx["common_sd"][0]
            grad[:, pos] = (G.sum(axis=(2, 3)) * z[:, :, dims["common"]]).sum(axis=1) * sd_sign(pos)

        if len(idx["calendar"]):
            P = len(d.period_labels)
            C = G.sum(axis=1)
            flat = (np.arange(n)[:, None, None] * P + d.periods[sl]).ravel()
            gcal = np.bincount(flat, weights=C.ravel(), minlength=n * P).reshape(n, P)
            grad[:, idx["calendar"]] = gcal[:, 1:]

        grad[bad] = 0.0
        return ll, grad, int(bad.sum()), n_nonpos

    # ------------------------------------------------------------------

    def evaluate(self, theta, scores: bool = True) -> LoglikResult:
        """Log-likelihood (and per-individual scores) at free vector ``theta``."""
        theta = np.asarray(theta, dtype=float)
        p = self.structure.from_free(theta)
        parts = self._map(lambda sl: self._chunk(sl, theta, p, scores))
        per = np.concatenate([r[0] for r in parts])
        sc = np.concatenate([r[1] for r in parts]) if scores else None
        floored = sum(r[2] for r in parts)
        nonpos = sum(r[3] for r in parts)
        if floored:
            logger.debug("%d individual likelihoods underflowed and were floored", floored)
        return LoglikResult(float(np.sum(per)), per, sc, floored, nonpos)

    def loglik(self, theta) -> float:
        return self.evaluate(theta, scores=False).total

    def loglik_and_gradient(self, theta):
        res = self.evaluate(theta, scores=True)
        return res.total, res.gradient

    def category_probabilities(self, theta) -> np.ndarray:
        """Draw-averaged category probabilities on the ``(N, T, S, 11)`` grid."""
        p = self.structure.from_free(np.asarray(theta, dtype=float))

        return np.concatenate(self._map(lambda sl: _grid_probs(self._predictor(sl, p)[0], p.thresholds)))


def _zero_nonfinite(a):
    a[~np.isfinite(a)] = 0.0
    return a


def _grid_probs(v, thresholds):
    # v: (n, Q, T, S); thresholds: (S, 10)
    S = thresholds.shape[0]
    out = np.stack([ordered_probs(v[..., s], thresholds[s]) for s in range(S)], axis=-2)
    return out.mean(axis=1)


def simulated_loglik(params: ParameterVector, design: DesignMatrices, draws: DrawMatrix | None = None):
    """Total simulated log-likelihood and per-individual contributions."""
    engine = LikelihoodEngine(design, draws)
    res = engine.evaluate(engine.structure.to_free(params), scores=False)
    return res.total, res.per_individual
