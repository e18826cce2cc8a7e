"""Declarative model configuration, stored as YAML.

Example::

    draws: 500
    seed: 20250101
    horizon: 17            # optional; defaults to the longest workshop gap
    calendar: month        # month | week | day | none
    waves: true            # per-stakeholder wave shifts
    covariates:
      numeric: [age]
      base: {gender: male}
      levels: {gender: [female, male, non-binary]}
    stakeholders:
      individuals: [gender=female]
      farmers: [location=rural]
    reversion:
      enabled: true
      covariates: [location=rural, voting=abstain]
      random: false
    alpha:
      covariates: []
      random: false
    random:
      stakeholder: true    # or a list of stakeholder names
      common: true

Covariate terms are either ``name=level`` (one dummy), a categorical name
(all non-base levels), or a numeric name declared under ``covariates.numeric``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import yaml

from .data import STAKEHOLDERS

DEFAULT_SEED = 20250101
DEFAULT_DRAWS = 500
CALENDAR_CHOICES = ("month", "week", "day", "none")


class ConfigError(ValueError):
    pass


def _terms(value, where):
    if value is None:
        return ()
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where}: expected a list of covariate terms")
    return tuple(str(v).strip() for v in value)


@dataclass(frozen=True)
class ModelConfig:
    stakeholder_terms: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    reversion: bool = True
    reversion_terms: tuple[str, ...] = ()
    alpha_terms: tuple[str, ...] = ()
    random_reversion: bool = False
    random_alpha: bool = False
    random_stakeholder: tuple[bool, ...] = (True,) * len(STAKEHOLDERS)
    random_common: bool = True
    wave_effects: bool = True
    calendar: str = "month"
    numeric: tuple[str, ...] = ()
    bases: Mapping[str, str] = field(default_factory=dict)
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    draws: int = DEFAULT_DRAWS
    seed: int = DEFAULT_SEED
    horizon: int | None = None

    def __post_init__(self):
        terms = {s: tuple(self.stakeholder_terms.get(s, ())) for s in STAKEHOLDERS}
        unknown = set(self.stakeholder_terms) - set(STAKEHOLDERS)
        if unknown:
            raise ConfigError(f"unknown stakeholders {sorted(unknown)}; valid: {', '.join(STAKEHOLDERS)}")
        object.__setattr__(self, "stakeholder_terms", terms)
        if len(self.random_stakeholder) != len(STAKEHOLDERS):
            raise ConfigError("random_stakeholder needs one flag per stakeholder")
        if self.calendar not in CALENDAR_CHOICES:
            raise ConfigError(f"calendar must be one of {CALENDAR_CHOICES}, got {self.calendar!r}")
        if self.draws < 1:
            raise ConfigError("draws must be at least 1")
        if not self.reversion and (self.alpha_terms or self.reversion_terms
                                   or self.random_reversion or self.random_alpha):
            raise ConfigError("reversion is disabled but reversion/alpha terms or random components are set")

    @property
    def n_random(self) -> int:
        """Number of random dimensions (draw columns) the model needs."""
        return (int(self.random_reversion) + int(self.random_alpha)
                + sum(self.random_stakeholder) + int(self.random_common))

    def without_random(self) -> "ModelConfig":
        return replace(self, random_reversion=False, random_alpha=False,
                       random_stakeholder=(False,) * len(STAKEHOLDERS), random_common=False)

    def all_terms(self) -> set[str]:
        out = set(self.reversion_terms) | set(self.alpha_terms)
        for terms in self.stakeholder_terms.values():
            out |= set(terms)
        return out

    @classmethod
    def from_dict(cls, doc: Mapping | None) -> "ModelConfig":
        doc = dict(doc or {})
        known = {"draws", "seed", "horizon", "calendar", "waves", "covariates",
                 "stakeholders", "reversion", "alpha", "random"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown configuration keys {sorted(extra)}")
        cov = doc.get("covariates") or {}
        stake = doc.get("stakeholders") or {}
        rev = doc.get("reversion") or {}
        alpha = doc.get("alpha") or {}
        rnd = doc.get("random") or {}
        st = rnd.get("stakeholder", True)
        if isinstance(st, bool):
            st_flags = (st,) * len(STAKEHOLDERS)
        else:
            names = set(_terms(st, "random.stakeholder"))
            if names - set(STAKEHOLDERS):
                raise ConfigError(f"unknown stakeholders in random.stakeholder: {sorted(names - set(STAKEHOLDERS))}")
            st_flags = tuple(s in names for s in STAKEHOLDERS)
        horizon = doc.get("horizon")
        return cls(
            stakeholder_terms={s: _terms(v, f"stakeholders.{s}") for s, v in stake.items()},
            reversion=bool(rev.get("enabled", True)),
            reversion_terms=_terms(rev.get("covariates"), "reversion.covariates"),
            alpha_terms=_terms(alpha.get("covariates"), "alpha.covariates"),
            random_reversion=bool(rev.get("random", False)),
            random_alpha=bool(alpha.get("random", False)),
            random_stakeholder=st_flags,
            random_common=bool(rnd.get("common", True)),
            wave_effects=bool(doc.get("waves", True)),
            calendar=str(doc.get("calendar", "month")),
            numeric=_terms(cov.get("numeric"), "covariates.numeric"),
            bases={str(k): str(v) for k, v in (cov.get("base") or {}).items()},
            levels={str(k): tuple(str(x) for x in v) for k, v in (cov.get("levels") or {}).items()},
            draws=int(doc.get("draws", DEFAULT_DRAWS)),
            seed=int(doc.get("seed", DEFAULT_SEED)),
            horizon=None if horizon is None else int(horizon),
        )

    def to_dict(self) -> dict:
        doc = {"draws": self.draws, "seed": self.seed}
        if self.horizon is not None:
            doc["horizon"] = self.horizon
        doc["calendar"] = self.calendar
        doc["waves"] = self.wave_effects
        doc["covariates"] = {
            "numeric": list(self.numeric),
            "base": dict(self.bases),
            "levels": {k: list(v) for k, v in self.levels.items()},
        }
        doc["stakeholders"] = {s: list(t) for s, t in self.stakeholder_terms.items()}
        doc["reversion"] = {"enabled": self.reversion, "covariates": list(self.reversion_terms),
                            "random": self.random_reversion}
        doc["alpha"] = {"covariates": list(self.alpha_terms), "random": self.random_alpha}
        if all(self.random_stakeholder) or not any(self.random_stakeholder):
            st = all(self.random_stakeholder)
        else:
            st = [s for s, on in zip(STAKEHOLDERS, self.random_stakeholder) if on]
        doc["random"] = {"stakeholder": st, "common": self.random_common}
        return doc


def load_config(path) -> ModelConfig:
    path = Path(path)
    with path.open() as fh:
        doc = yaml.safe_load(fh)
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return ModelConfig.from_dict(doc)


def dump_config(config: ModelConfig, path=None) -> str:
    text = yaml.safe_dump(config.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
