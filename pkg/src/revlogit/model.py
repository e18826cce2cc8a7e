"""Pure model functions: decay, individual reversion and rate, the latent
predictor and ordered-logit category probabilities.

Everything here broadcasts over leading array dimensions so the simulator,
the likelihood engine and the brute-force test oracles share one
implementation of the model equations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

N_WORKSHOPS = 5
N_CATEGORIES = 11
_CLIP = 600.0
_FACTOR_LIMIT = 300.0


def _as_float(x):
    return np.asarray(x, dtype=float)


def _unwrap(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def decay_exponent(delta, horizon):
    """Per-day exponent ``1/D - 1/(D - delta)`` used by :func:`decay`.

    Returns ``-inf`` for ``delta >= horizon`` (saturated decay). The value is
    nonpositive for every admissible ``delta``.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    delta = _as_float(delta)
    if np.any(delta < 0):
        raise ValueError("elapsed days must be nonnegative")
    out = np.full(delta.shape, -np.inf)
    live = delta < horizon
    out[live] = 1.0 / horizon - 1.0 / (horizon - delta[live])
    return out


def decay_from_exponent(exponent, alpha, derivative: bool = True):
    """Decay values and their derivative with respect to ``alpha``.

    ``d = 1 - exp(alpha * exponent)`` for ``alpha > 0``; ``d = 0`` for
    ``alpha <= 0``. A ``-inf`` exponent saturates at ``d = 1`` with zero
    derivative. With ``derivative=False`` the second value is ``None``.
    """
    exponent = _as_float(exponent)
    alpha = _as_float(alpha)
    positive = alpha > 0
    rate = np.where(positive, alpha, 0.0)
    with np.errstate(invalid="ignore"):
        # 0 * -inf is NaN: a saturated gap with alpha <= 0, where d is 0
        d = np.nan_to_num(-np.expm1(rate * exponent), nan=0.0)
        if not derivative:
            return d, None
        dd = np.nan_to_num(np.where(positive, -exponent * (1.0 - d), 0.0), nan=0.0)
    return d, dd


def decay(delta, alpha, horizon):
    """Share of a workshop shift that has reverted after ``delta`` days.

    Parameters
    ----------
    delta : array_like
        Days since the workshop, nonnegative.
    alpha : array_like
        Reversion rate. Larger values revert faster; ``alpha <= 0`` gives no
        reversion before the horizon.
    horizon : float
        Day count at which reversion is complete.

    Returns
    -------
    float or ndarray
        Values in ``[0, 1]``; 0 on the workshop day, 1 from ``horizon`` on.
    """
    d, _ = decay_from_exponent(decay_exponent(delta, horizon), alpha, derivative=False)
    return _unwrap(d)


def _heterogeneous(base, effects, covariates, sd, draw):
    effects = _as_float(effects)
    covariates = _as_float(covariates)
    if effects.shape[-1:] != covariates.shape[-1:] and not (effects.size == 0 and covariates.size == 0):
        raise ValueError(
            f"{effects.shape[-1]} coefficients for {covariates.shape[-1]} covariates"
        )
    shift = covariates @ effects if effects.size else 0.0
    return _unwrap(base + shift + sd * _as_float(draw))


def individual_reversion(base, effects, covariates, sd, draw):
    """``rho_i = base + covariates @ effects + sd * draw``; unrestricted sign."""
    return _heterogeneous(base, effects, covariates, sd, draw)


def individual_alpha(base, effects, covariates, sd, draw):
    """``alpha_i = base + covariates @ effects + sd * draw``."""
    return _heterogeneous(base, effects, covariates, sd, draw)


def workshop_indicators(t):
    """Indicator of which of the five workshops have ended by time index ``t``."""
    t = int(t)
    if not 1 <= t <= 2 * N_WORKSHOPS:
        raise ValueError(f"time index must lie in 1..10, got {t}")
    return (np.arange(1, N_WORKSHOPS + 1) * 2 <= t).astype(float)


def workshop_multiplier(indicators, decay_values, rho):
    """``I_w - rho * d_w``; with ``rho`` in [0, 1] this lies in [1 - rho, 1]."""
    indicators = _as_float(indicators)
    return indicators - _as_float(rho)[..., None] * _as_float(decay_values) * indicators


@dataclass(frozen=True)
class IndividualRealization:
    """One simulated draw of an individual's random components.

    ``stakeholder`` holds the five stakeholder effects ``xi``; ``common`` is
    the already-scaled shared error component ``sd_common * draw``.
    """

    rho: np.ndarray | float
    alpha: np.ndarray | float
    stakeholder: np.ndarray
    common: np.ndarray | float


def linear_predictor(
    indicators,
    delta,
    horizon,
    workshop_effects,
    realization,
    offset=0.0,
):
    """Latent predictor for every stakeholder.

    Parameters
    ----------
    indicators, delta : array_like, shape (..., 5)
        Workshop occurrence indicators and days since each workshop.
    horizon : float
    workshop_effects : array_like, shape (5 stakeholders, 5 workshops)
    realization : IndividualRealization
        Fields broadcast against the leading dimensions.
    offset : array_like, shape (..., 5 stakeholders)
        Sum of wave shifts, demographic effects and the calendar effect.

    Returns
    -------
    ndarray, shape (..., 5)
        The logistic disturbance is not included; it lives in the link.
    """
    indicators = _as_float(indicators)
    d = decay(np.where(indicators > 0, delta, 0.0), realization.alpha, horizon)
    mult = workshop_multiplier(indicators, d, realization.rho)
    v = mult @ _as_float(workshop_effects).T
    v = v + _as_float(realization.stakeholder) + _as_float(realization.common)[..., None]
    return v + _as_float(offset)


def _check_thresholds(thresholds):
    thresholds = _as_float(thresholds)
    if thresholds.shape[-1] != N_CATEGORIES - 1:
        raise ValueError(f"expected {N_CATEGORIES - 1} thresholds, got {thresholds.shape[-1]}")
    if np.any(np.diff(thresholds, axis=-1) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    return thresholds


def ordered_probs(v, thresholds):
    """Category probabilities of an 11-level ordered logit.

    ``P(r) = L(tau_{r+1} - v) - L(tau_r - v)`` with open end cut points.
    """
    thresholds = _check_thresholds(thresholds)
    v = _as_float(v)
    cdf = expit(thresholds - v[..., None])
    shape = cdf.shape[:-1] + (1,)
    cdf = np.concatenate([np.zeros(shape), cdf, np.ones(shape)], axis=-1)
    return np.diff(cdf, axis=-1)


def ordered_logit_terms(v, lower, upper, derivatives: bool = True):
    """Log probability of the category bounded by ``(lower, upper]`` and
    its derivatives with respect to ``v``, ``lower`` and ``upper``.

    With ``a = lower - v`` and ``b = upper - v`` the probability is written
    ``(1 - e^(a-b)) / ((1 + e^a)(1 + e^-b))``. Infinite bounds give exact
    zeros in that form and neither tail cancels. Finite ``a`` is capped at
    600 and ``b`` floored at -600 to keep the products in range; this only
    matters where the log probability is already below -600. When every
    finite input is within 300 in magnitude, the same expression is
    evaluated with one exponential per cell. With ``derivatives=False`` the
    three derivative slots are ``None``.
    """
    v, lower, upper = _as_float(v), _as_float(lower), _as_float(upper)
    if _in_factored_range(v) and _in_factored_range(lower, bound=True) and _in_factored_range(upper, bound=True):
        return _factored_terms(v, lower, upper, derivatives)
    return _capped_terms(v, lower, upper, derivatives)


def _in_factored_range(x, bound: bool = False) -> bool:
    """True when every entry (every finite entry of a bound) has magnitude at
    most ``_FACTOR_LIMIT``. NaN entries fail the check."""
    if bound:
        x = np.where(np.isinf(x), 0.0, x)
    if np.size(x) == 0:
        return True
    return bool(max(-np.min(x), np.max(x)) <= _FACTOR_LIMIT)


def _factored_terms(v, lower, upper, derivatives):
    # e^a = e^lower e^-v and e^-b = e^-upper e^v need one exponential per
    # cell, and 1 - e^(a-b) depends on the bounds only. Magnitudes up to
    # _FACTOR_LIMIT keep every factor a normal double.
    ev = np.atleast_1d(np.exp(-v))
    ea = np.exp(lower) * ev
    enb = np.exp(-upper) / ev
    num = -np.expm1(lower - upper)
    shape = np.broadcast_shapes(np.shape(v), np.shape(lower), np.shape(upper))
    if not derivatives:
        ea += 1.0
        enb += 1.0
        ea *= enb
        np.divide(num, ea, out=ea)
        return np.log(ea, out=ea).reshape(shape), None, None, None
    one_a = 1.0 + ea
    one_b = 1.0 + enb
    logp = np.log(num / (one_a * one_b))
    d_upper = enb * one_a / (one_b * num)
    d_lower = -ea * one_b / (one_a * num)
    d_v = -(d_upper + d_lower)
    return tuple(x.reshape(shape) for x in (logp, d_v, d_lower, d_upper))


def _capped_terms(v, lower, upper, derivatives):
    a = np.minimum(lower - v, _CLIP)
    b = np.maximum(upper - v, -_CLIP)
    ea = np.exp(a)
    enb = np.exp(-b)
    num = -np.expm1(a - b)
    one_a = 1.0 + ea
    one_b = 1.0 + enb
    logp = np.log(num / (one_a * one_b))
    if not derivatives:
        return logp, None, None, None
    d_upper = enb * one_a / (one_b * num)
    d_lower = -ea * one_b / (one_a * num)
    d_v = -(d_upper + d_lower)
    return logp, d_v, d_lower, d_upper


def category_bounds(thresholds, y):
    """Lower and upper cut points of category ``y`` (0..10) under ``thresholds``."""
    thresholds = _as_float(thresholds)
    shape = thresholds.shape[:-1] + (1,)
    padded = np.concatenate(
        [np.full(shape, -np.inf), thresholds, np.full(shape, np.inf)], axis=-1
    )
    y = np.asarray(y, dtype=int)
    lower = np.take_along_axis(padded, y[..., None], axis=-1)[..., 0] if padded.ndim > 1 else padded[y]
    upper = np.take_along_axis(padded, y[..., None] + 1, axis=-1)[..., 0] if padded.ndim > 1 else padded[y + 1]
    return lower, upper


def log_ordered_prob(y, v, thresholds):
    """Log probability that the rating equals ``y`` given predictor ``v``."""
    lower, upper = category_bounds(_check_thresholds(thresholds), y)
    return _unwrap(ordered_logit_terms(_as_float(v), lower, upper, derivatives=False)[0])
