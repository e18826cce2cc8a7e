"""Descriptive tables, paired t-tests, trajectories and reversion curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import betainc

from .data import N_TIMES, STAKEHOLDERS
from .model import decay

DESCRIBE_COLUMNS = ["stakeholder", "pooled_mean", "mean_t1", "mean_t10", "change", "p_value", "n_pairs"]


@dataclass(frozen=True)
class TTestResult:
    """Paired t-test outcome.

    ``flag`` is ``"zero_variance"`` when all differences are equal, in which
    case the statistic is degenerate and ``p`` is 0 (nonzero mean) or 1.
    """

    t: float
    df: int
    p: float
    flag: str | None = None


def t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t, ``I_{df/(df+t^2)}(df/2, 1/2)``."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_t_test(differences) -> TTestResult:
    """Two-sided one-sample t-test of the mean difference against zero.

    Raises
    ------
    ValueError
        With fewer than two differences or non-finite values.
    """
    d = np.asarray(differences, dtype=float).ravel()
    n = d.size
    if n < 2:
        raise ValueError(f"a paired t-test needs at least 2 differences, got {n}")
    if not np.all(np.isfinite(d)):
        raise ValueError("differences must be finite")
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0 or sd <= 1e-14 * abs(mean):
        if mean == 0:
            return TTestResult(0.0, n - 1, 1.0, "zero_variance")
        return TTestResult(math.copysign(math.inf, mean), n - 1, 0.0, "zero_variance")
    t = float(mean / (sd / math.sqrt(n)))
    return TTestResult(t, n - 1, t_sf_two_sided(t, n - 1))


def _first_last(ratings: pd.DataFrame) -> pd.DataFrame:
    """Rows of (individual, stakeholder) observed at both t=1 and t=10."""
    wide = ratings[ratings["time_index"].isin([1, N_TIMES])].pivot_table(
        index=["individual_id", "stakeholder"], columns="time_index", values="rating", aggfunc="first")
    if 1 not in wide or N_TIMES not in wide:
        return pd.DataFrame(columns=["individual_id", "stakeholder", "first", "last"])
    wide = wide[[1, N_TIMES]].dropna()
    wide.columns = ["first", "last"]
    return wide.reset_index()


def _row(label, pooled, pairs) -> dict:
    n = len(pairs)
    first = pairs["first"].to_numpy(float)
    last = pairs["last"].to_numpy(float)
    p = paired_t_test(last - first).p if n >= 2 else float("nan")
    m1 = first.mean() if n else float("nan")
    m10 = last.mean() if n else float("nan")
    return {"stakeholder": label, "pooled_mean": pooled, "mean_t1": m1, "mean_t10": m10,
            "change": (last - first).mean() if n else float("nan"), "p_value": p, "n_pairs": n}


def describe(dataset) -> pd.DataFrame:
    """Descriptive table: pooled mean, means at the first and last
    measurement, their change and a paired t-test p-value.

    The first and last means and the change use individuals observed at
    both t=1 and t=10, so ``change == mean_t10 - mean_t1``. The ``All`` row
    pools (individual, stakeholder) pairs. A p-value with fewer than two pairs
    is NaN.
    """
    r = dataset.ratings
    if r.empty:
        raise ValueError("dataset has no ratings")
    pairs = _first_last(r)
    rows = [_row("All", float(r["rating"].mean()), pairs)]
    for s in STAKEHOLDERS:
        sub = r.loc[r["stakeholder"] == s, "rating"]
        rows.append(_row(s, float(sub.mean()) if len(sub) else float("nan"), pairs[pairs["stakeholder"] == s]))
    return pd.DataFrame(rows, columns=DESCRIBE_COLUMNS)


def trajectories(dataset) -> pd.DataFrame:
    """Mean rating and respondent count per stakeholder and time index.

    Every (stakeholder, t) cell is present; empty cells have ``n == 0`` and
    a NaN mean.
    """
    r = dataset.ratings
    if r.empty:
        raise ValueError("dataset has no ratings")
    grid = pd.MultiIndex.from_product([list(STAKEHOLDERS), range(1, N_TIMES + 1)], names=["stakeholder", "t"])
    agg = r.groupby(["stakeholder", "time_index"])["rating"].agg(["mean", "count"])
    agg.index.names = ["stakeholder", "t"]
    agg = agg.reindex(grid)
    return pd.DataFrame({
        "stakeholder": grid.get_level_values(0),
        "t": grid.get_level_values(1),
        "mean": agg["mean"].to_numpy(float),
        "n": agg["count"].fillna(0).to_numpy(int),
    })


@dataclass(frozen=True)
class ReversionCurve:
    """Share of a workshop shift remaining, in percent, against days elapsed."""

    label: str
    setting: Mapping[str, object]
    rho: float
    alpha: float
    horizon: float
    delta: np.ndarray
    percent_remaining: np.ndarray


def _group_value(term: str, setting: Mapping[str, object]) -> float:
    name, eq, level = term.partition("=")
    if eq:
        return float(name in setting and str(setting[name]) == level)
    value = setting.get(name, 0.0)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"numeric covariate {name!r} needs a number, got {value!r}") from None


def _group_label(setting: Mapping[str, object]) -> str:
    return ", ".join(f"{k}={v}" for k, v in setting.items()) or "base"


def reversion_curves(result, groups: Sequence[Mapping[str, object]] | Mapping[str, Mapping[str, object]],
                     step: float = 1.0) -> list[ReversionCurve]:
    """Reversion paths implied by estimates for covariate settings.

    Parameters
    ----------
    result : EstimationResult or Report
        Anything with an ``estimates`` mapping (parameter name to value) and
        a ``horizon``.
    groups : list of mappings, or mapping of label to mapping
        Covariate settings such as ``{"location": "rural"}``. A ``name=level``
        dummy is 1 when the setting names that level; covariates left out sit
        at their base. Numeric covariates take the given value (default 0).
    step : float
        Spacing of the day grid; the grid always includes 0 and the horizon.

    Returns
    -------
    list of ReversionCurve
        Random spreads are set to zero.
    """
    est = dict(result.estimates)
    if "reversion.base" not in est:
        raise ValueError("the estimates contain no reversion component")
    horizon = float(result.horizon)
    if step <= 0:
        raise ValueError("step must be positive")
    rho_terms = [n.split(".", 1)[1] for n in est if n.startswith("reversion.") and n not in ("reversion.base", "reversion.sd")]
    alpha_terms = [n.split(".", 1)[1] for n in est if n.startswith("alpha.") and n not in ("alpha.base", "alpha.sd")]
    known = {t.partition("=")[0] for t in rho_terms + alpha_terms}
    items = list(groups.items()) if isinstance(groups, Mapping) else [(None, g) for g in groups]
    grid = np.arange(0.0, horizon, step)
    grid = np.append(grid, horizon)

    curves = []
    for label, setting in items:
        unknown = set(setting) - known
        if unknown:
            raise ValueError(f"covariates {sorted(unknown)} are not in the reversion or alpha equations; "
                             f"available: {sorted(known) or 'none'}")
        rho = est["reversion.base"] + sum(est[f"reversion.{t}"] * _group_value(t, setting) for t in rho_terms)
        alpha = est.get("alpha.base", 1.0) + sum(est[f"alpha.{t}"] * _group_value(t, setting) for t in alpha_terms)
        d = np.asarray(decay(grid, alpha, horizon), dtype=float)
        curves.append(ReversionCurve(label or _group_label(setting), dict(setting), float(rho), float(alpha),
                                     horizon, grid, 100.0 * (1.0 - rho * d)))
    return curves


def curves_frame(curves: Sequence[ReversionCurve]) -> pd.DataFrame:
    """Long format: group, delta_days, percent_remaining."""
    frames = [pd.DataFrame({"group": c.label, "delta_days": c.delta, "percent_remaining": c.percent_remaining})
              for c in curves]
    if not frames:
        return pd.DataFrame(columns=["group", "delta_days", "percent_remaining"])
    return pd.concat(frames, ignore_index=True)
