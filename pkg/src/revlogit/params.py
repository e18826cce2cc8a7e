"""Structured parameters and their mapping to an unconstrained vector.

Thresholds are optimized as the first cut point plus log gaps; standard
deviations as free reals whose absolute value is used. Everything else is
optimized as reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .data import STAKEHOLDERS
from .design import DesignMatrices
from .model import N_CATEGORIES, N_WORKSHOPS

N_THRESHOLDS = N_CATEGORIES - 1
S = len(STAKEHOLDERS)


@dataclass
class ParameterVector:
    """Model parameters in reporting space.

    Disabled components keep zero-sized arrays or zero standard deviations.
    """

    thresholds: np.ndarray
    workshop_effects: np.ndarray
    wave_shifts: np.ndarray
    demographic_effects: tuple[np.ndarray, ...]
    reversion_base: float = 0.0
    reversion_effects: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reversion_sd: float = 0.0
    alpha_base: float = 1.0
    alpha_effects: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alpha_sd: float = 0.0
    stakeholder_sd: np.ndarray = field(default_factory=lambda: np.zeros(S))
    common_sd: float = 0.0
    calendar_effects: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def copy(self) -> "ParameterVector":
        return replace(
            self,
            thresholds=self.thresholds.copy(),
            workshop_effects=self.workshop_effects.copy(),
            wave_shifts=self.wave_shifts.copy(),
            demographic_effects=tuple(g.copy() for g in self.demographic_effects),
            reversion_effects=self.reversion_effects.copy(),
            alpha_effects=self.alpha_effects.copy(),
            stakeholder_sd=self.stakeholder_sd.copy(),
            calendar_effects=self.calendar_effects.copy(),
        )


@dataclass(frozen=True)
class ParameterStructure:
    """Which parameters exist for a design and where they sit in the free vector."""

    stakeholder_terms: tuple[tuple[str, ...], ...]
    wave_labels: tuple[int, ...]
    reversion: bool
    reversion_terms: tuple[str, ...]
    alpha_terms: tuple[str, ...]
    random_reversion: bool
    random_alpha: bool
    random_stakeholder: tuple[bool, ...]
    random_common: bool
    calendar_labels: tuple[str, ...]

    @classmethod
    def from_design(cls, design: DesignMatrices) -> "ParameterStructure":
        c = design.config
        return cls(
            stakeholder_terms=design.stakeholder_terms,
            wave_labels=design.wave_dummy_labels,
            reversion=c.reversion,
            reversion_terms=design.reversion_terms if c.reversion else (),
            alpha_terms=design.alpha_terms if c.reversion else (),
            random_reversion=c.random_reversion and c.reversion,
            random_alpha=c.random_alpha and c.reversion,
            random_stakeholder=tuple(c.random_stakeholder),
            random_common=c.random_common,
            calendar_labels=design.calendar_labels,
        )

    # ------------------------------------------------------------------
    # layout

    @property
    def random_dims(self) -> dict[str, int]:
        """Draw column of each active random component."""
        dims = {}
        if self.random_reversion:
            dims["reversion"] = len(dims)
        if self.random_alpha:
            dims["alpha"] = len(dims)
        for s, on in zip(STAKEHOLDERS, self.random_stakeholder):
            if on:
                dims[s] = len(dims)
        if self.random_common:
            dims["common"] = len(dims)
        return dims

    @property
    def n_random(self) -> int:
        return len(self.random_dims)

    def _layout(self):
        names = []
        idx = {}

        def take(keys):
            start = len(names)
            names.extend(keys)
            return np.arange(start, len(names))

        M = len(self.wave_labels)
        tau, work, wave, gamma = [], [], [], []
        for s, terms in zip(STAKEHOLDERS, self.stakeholder_terms):
            tau.append(take([f"{s}.tau_{k}" for k in range(1, N_THRESHOLDS + 1)]))
            work.append(take([f"{s}.workshop_{w}" for w in range(1, N_WORKSHOPS + 1)]))
            wave.append(take([f"{s}.wave_{m}" for m in self.wave_labels]))
            gamma.append(take([f"{s}.{t}" for t in terms]))
        idx["tau"] = np.array(tau)
        idx["workshop"] = np.array(work)
        idx["wave"] = np.array(wave).reshape(S, M)
        idx["gamma"] = tuple(gamma)
        none = np.zeros(0, dtype=int)
        if self.reversion:
            idx["rho_base"] = take(["reversion.base"])
            idx["rho_effects"] = take([f"reversion.{t}" for t in self.reversion_terms])
            idx["rho_sd"] = take(["reversion.sd"]) if self.random_reversion else none
            idx["alpha_base"] = take(["alpha.base"])
            idx["alpha_effects"] = take([f"alpha.{t}" for t in self.alpha_terms])
            idx["alpha_sd"] = take(["alpha.sd"]) if self.random_alpha else none
        else:
            for key in ("rho_base", "rho_effects", "rho_sd", "alpha_base", "alpha_effects", "alpha_sd"):
                idx[key] = none
        st = np.full(S, -1)
        for k, (s, on) in enumerate(zip(STAKEHOLDERS, self.random_stakeholder)):
            if on:
                st[k] = take([f"{s}.sd"])[0]
        idx["stakeholder_sd"] = st
        idx["common_sd"] = take(["common.sd"]) if self.random_common else none
        idx["calendar"] = take([f"calendar.{lab}" for lab in self.calendar_labels])
        return tuple(names), idx

    @cached_property
    def names(self) -> tuple[str, ...]:
        return self._layout()[0]

    @cached_property
    def index(self) -> dict:
        return self._layout()[1]

    @property
    def n_free(self) -> int:
        return len(self.names)

    def sd_positions(self) -> np.ndarray:
        idx = self.index
        pos = [idx["rho_sd"], idx["alpha_sd"], idx["stakeholder_sd"][idx["stakeholder_sd"] >= 0], idx["common_sd"]]
        return np.concatenate([np.asarray(p, dtype=int) for p in pos])

    # ------------------------------------------------------------------
    # conversions

    def zeros(self) -> ParameterVector:
        M = len(self.wave_labels)
        return ParameterVector(
            thresholds=np.tile(np.arange(N_THRESHOLDS, dtype=float) - 4.5, (S, 1)),
            workshop_effects=np.zeros((S, N_WORKSHOPS)),
            wave_shifts=np.zeros((S, M)),
            demographic_effects=tuple(np.zeros(len(t)) for t in self.stakeholder_terms),
            reversion_effects=np.zeros(len(self.reversion_terms)),
            alpha_effects=np.zeros(len(self.alpha_terms)),
            stakeholder_sd=np.zeros(S),
            calendar_effects=np.zeros(len(self.calendar_labels)),
        )

    def to_reported(self, p: ParameterVector) -> np.ndarray:
        """Flat vector in name order, reporting space."""
        idx = self.index
        out = np.zeros(self.n_free)
        out[idx["tau"]] = p.thresholds
        out[idx["workshop"]] = p.workshop_effects
        out[idx["wave"]] = p.wave_shifts
        for k in range(S):
            out[idx["gamma"][k]] = p.demographic_effects[k]
        if self.reversion:
            out[idx["rho_base"]] = p.reversion_base
            out[idx["rho_effects"]] = p.reversion_effects
            out[idx["rho_sd"]] = p.reversion_sd
            out[idx["alpha_base"]] = p.alpha_base
            out[idx["alpha_effects"]] = p.alpha_effects
            out[idx["alpha_sd"]] = p.alpha_sd
        st = idx["stakeholder_sd"]
        out[st[st >= 0]] = p.stakeholder_sd[st >= 0]
        out[idx["common_sd"]] = p.common_sd
        out[idx["calendar"]] = p.calendar_effects
        return out

    def from_reported(self, values) -> ParameterVector:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} values, got {values.shape}")
        idx = self.index
        p = self.zeros()
        p.thresholds = values[idx["tau"]].copy()
        p.workshop_effects = values[idx["workshop"]].copy()
        p.wave_shifts = values[idx["wave"]].copy()
        p.demographic_effects = tuple(values[g].copy() for g in idx["gamma"])
        if self.reversion:
            p.reversion_base = float(values[idx["rho_base"]][0])
            p.reversion_effects = values[idx["rho_effects"]].copy()
            p.reversion_sd = abs(float(values[idx["rho_sd"]][0])) if self.random_reversion else 0.0
            p.alpha_base = float(values[idx["alpha_base"]][0])
            p.alpha_effects = values[idx["alpha_effects"]].copy()
            p.alpha_sd = abs(float(values[idx["alpha_sd"]][0])) if self.random_alpha else 0.0
        st = idx["stakeholder_sd"]
        p.stakeholder_sd = np.where(st >= 0, np.abs(values[np.maximum(st, 0)]), 0.0)
        p.common_sd = abs(float(values[idx["common_sd"]][0])) if self.random_common else 0.0
        p.calendar_effects = values[idx["calendar"]].copy()
        return p

    def free_from_reported(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float).copy()
        tau = self.index["tau"]
        t = values[tau]
        gaps = np.diff(t, axis=1)
        if np.any(gaps <= 0):
            raise ValueError("thresholds must be strictly increasing")
        values[tau[:, 1:]] = np.log(gaps)
        return values

    def reported_from_free(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = theta.copy()
        tau = self.index["tau"]
        raw = theta[tau]
        out[tau] = np.cumsum(np.column_stack([raw[:, :1], np.exp(raw[:, 1:])]), axis=1)
        sd = self.sd_positions()
        out[sd] = np.abs(theta[sd])
        return out

    def to_free(self, p: ParameterVector) -> np.ndarray:
        return self.free_from_reported(self.to_reported(p))

    def from_free(self, theta) -> ParameterVector:
        return self.from_reported(self.reported_from_free(theta))

    def jacobian(self, theta) -> np.ndarray:
        """Derivative of the reported vector with respect to the free vector."""
        theta = np.asarray(theta, dtype=float)
        J = np.eye(self.n_free)
        for row in self.index["tau"]:
            scale = np.concatenate([[1.0], np.exp(theta[row[1:]])])
            for k in range(len(row)):
                J[row[k], row[: k + 1]] = scale[: k + 1]
        sd = self.sd_positions()
        J[sd, sd] = np.where(theta[sd] < 0, -1.0, 1.0)
        return J

    def as_dict(self, p: ParameterVector) -> dict[str, float]:
        return dict(zip(self.names, (float(v) for v in self.to_reported(p))))

    def from_dict(self, values: dict[str, float], default: ParameterVector | None = None) -> ParameterVector:
        base = self.to_reported(default if default is not None else self.zeros())
        missing = [n for n in self.names if n not in values and default is None]
        if missing:
            raise KeyError(f"missing parameters: {', '.join(missing[:5])}{' ...' if len(missing) > 5 else ''}")
        for k, name in enumerate(self.names):
            if name in values:
                base[k] = float(values[name])
        return self.from_reported(base)
