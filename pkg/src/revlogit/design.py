"""Design quantities built from a dataset and a model configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import ModelConfig
from .data import MISSING, N_TIMES, STAKEHOLDERS, Dataset, elapsed_days_table, period_labels
from .model import N_WORKSHOPS, decay_exponent, workshop_indicators


class DesignError(ValueError):
    pass


def expand_categorical(values: pd.Series) -> pd.DataFrame:
    """One dummy column per level, ``missing`` included; rows sum to one."""
    values = values.fillna(MISSING).astype(str)
    levels = sorted(set(values))
    return pd.DataFrame({f"{values.name}={lev}": (values == lev).astype(float) for lev in levels},
                        index=values.index)


def base_level(individuals: pd.DataFrame, name: str, config: ModelConfig) -> str:
    if name in config.bases:
        return config.bases[name]
    levels = sorted(set(individuals[name]) - {MISSING})
    return levels[0] if levels else MISSING


def expand_term(individuals: pd.DataFrame, term: str, config: ModelConfig) -> list[tuple[str, np.ndarray]]:
    """Columns a single covariate term contributes, as ``(label, values)`` pairs."""
    valid = [c for c in individuals.columns if c != "wave"]
    name, _, level = term.partition("=")
    name, level = name.strip(), level.strip()
    if name not in valid:
        raise DesignError(f"unknown covariate {name!r}; valid names: {', '.join(valid) or '(none)'}")
    col = individuals[name].astype(str)
    if level:
        known = set(col) | set(config.levels.get(name, ())) | {MISSING}
        if level not in known:
            raise DesignError(f"covariate {name!r} has no level {level!r}; levels: {', '.join(sorted(known))}")
        return [(f"{name}={level}", (col == level).to_numpy(float))]
    if name in config.numeric:
        num = pd.to_numeric(col.where(col != MISSING), errors="coerce")
        if num.isna().sum() > (col == MISSING).sum():
            raise DesignError(f"covariate {name!r} declared numeric but has non-numeric values")
        return [(name, num.fillna(0.0).to_numpy(float))]
    base = base_level(individuals, name, config)
    return [(f"{name}={lev}", (col == lev).to_numpy(float))
            for lev in sorted(set(col)) if lev != base]


def term_matrix(individuals: pd.DataFrame, terms, config: ModelConfig) -> tuple[tuple[str, ...], np.ndarray]:
    labels, cols = [], []
    for term in terms:
        for label, values in expand_term(individuals, term, config):
            if label in labels:
                raise DesignError(f"covariate term {label!r} enters the same equation twice")
            labels.append(label)
            cols.append(values)
    mat = np.column_stack(cols) if cols else np.zeros((len(individuals), 0))
    return tuple(labels), mat


@dataclass(frozen=True)
class DesignMatrices:
    """Arrays consumed by the likelihood, laid out on a full
    ``(individual, time, stakeholder)`` grid with unobserved cells at -1."""

    individual_ids: tuple[str, ...]
    wave_labels: tuple[int, ...]
    wave_index: np.ndarray
    wave_dummy_labels: tuple[int, ...]
    wave_dummies: np.ndarray
    stakeholder_terms: tuple[tuple[str, ...], ...]
    stakeholder_x: tuple[np.ndarray, ...]
    reversion_terms: tuple[str, ...]
    reversion_x: np.ndarray
    alpha_terms: tuple[str, ...]
    alpha_x: np.ndarray
    ratings: np.ndarray
    periods: np.ndarray
    period_labels: tuple[str, ...]
    indicators: np.ndarray
    delta: np.ndarray
    exponent: np.ndarray
    horizon: float
    config: ModelConfig

    @property
    def n_individuals(self) -> int:
        return len(self.individual_ids)

    @property
    def mask(self) -> np.ndarray:
        return self.ratings >= 0

    @property
    def n_observations(self) -> int:
        return int(self.mask.sum())

    @property
    def calendar_labels(self) -> tuple[str, ...]:
        """Labels of the estimated calendar effects (first period is the base)."""
        return self.period_labels[1:]

    def observation_table(self) -> pd.DataFrame:
        """Long per-observation view of the design."""
        i, t, s = np.nonzero(self.mask)
        out = {
            "individual_id": np.asarray(self.individual_ids, dtype=object)[i],
            "stakeholder": np.asarray(STAKEHOLDERS, dtype=object)[s],
            "time_index": t + 1,
            "rating": self.ratings[i, t, s],
        }
        for w in range(N_WORKSHOPS):
            out[f"workshop_{w + 1}"] = self.indicators[t, w]
        for w in range(N_WORKSHOPS):
            out[f"days_since_{w + 1}"] = self.delta[self.wave_index[i], t, w]
        for k, lab in enumerate(self.wave_dummy_labels):
            out[f"wave_{lab}"] = self.wave_dummies[i, k]
        per = self.periods[i, t, s]
        for k, lab in enumerate(self.calendar_labels, start=1):
            out[f"calendar_{lab}"] = (per == k).astype(float)
        seen = set()
        for terms, x in list(zip(self.stakeholder_terms, self.stakeholder_x)) + [
                (self.reversion_terms, self.reversion_x), (self.alpha_terms, self.alpha_x)]:
            for k, lab in enumerate(terms):
                if lab not in seen:
                    seen.add(lab)
                    out[lab] = x[i, k]
        return pd.DataFrame(out)


def build_design(dataset: Dataset, config: ModelConfig) -> DesignMatrices:
    """Turn a validated dataset into model arrays under ``config``."""
    ind = dataset.individuals
    ids = tuple(ind.index)
    pos = {iid: k for k, iid in enumerate(ids)}
    schedule = dataset.schedule.with_horizon(config.horizon) if config.horizon else dataset.schedule

    wave_labels = tuple(sorted(set(int(w) for w in ind["wave"])))
    wave_index = np.array([wave_labels.index(int(w)) for w in ind["wave"]], dtype=int)
    if config.wave_effects and len(wave_labels) > 1:
        dummy_labels = wave_labels[1:]
        wave_dummies = np.column_stack([(ind["wave"].to_numpy() == m).astype(float) for m in dummy_labels])
    else:
        dummy_labels = ()
        wave_dummies = np.zeros((len(ids), 0))

    st_terms, st_x = [], []
    for s in STAKEHOLDERS:
        labels, x = term_matrix(ind, config.stakeholder_terms[s], config)
        st_terms.append(labels)
        st_x.append(x)
    rev_terms, rev_x = term_matrix(ind, config.reversion_terms, config)
    alpha_terms, alpha_x = term_matrix(ind, config.alpha_terms, config)

    r = dataset.ratings
    ii = r["individual_id"].map(pos).to_numpy()
    tt = r["time_index"].to_numpy() - 1
    ss = r["stakeholder"].map(STAKEHOLDERS.index).to_numpy()
    ratings = np.full((len(ids), N_TIMES, len(STAKEHOLDERS)), -1, dtype=int)
    ratings[ii, tt, ss] = r["rating"].to_numpy()

    labels = period_labels(r["date"], config.calendar) if len(r) else []
    order = sorted(set(labels))
    periods = np.zeros(ratings.shape, dtype=int)
    periods[ii, tt, ss] = [order.index(lab) for lab in labels]

    indicators = np.array([workshop_indicators(t) for t in range(1, N_TIMES + 1)])
    delta = np.array([elapsed_days_table(schedule, m) for m in wave_labels])
    exponent = decay_exponent(delta, schedule.horizon)
    # Workshops that have not occurred contribute nothing.
    exponent = np.where(indicators[None] > 0, exponent, 0.0)

    return DesignMatrices(
        individual_ids=ids,
        wave_labels=wave_labels,
        wave_index=wave_index,
        wave_dummy_labels=dummy_labels,
        wave_dummies=wave_dummies,
        stakeholder_terms=tuple(st_terms),
        stakeholder_x=tuple(st_x),
        reversion_terms=rev_terms,
        reversion_x=rev_x,
        alpha_terms=alpha_terms,
        alpha_x=alpha_x,
        ratings=ratings,
        periods=periods,
        period_labels=tuple(order),
        indicators=indicators,
        delta=delta,
        exponent=exponent,
        horizon=float(schedule.horizon),
        config=config,
    )
