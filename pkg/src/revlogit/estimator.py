"""Scikit-learn style estimator for the reversion ordered-logit panel model."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import logit
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dataset, check_positive_int, resolve_config
from .data import STAKEHOLDERS, Dataset
from .design import DesignMatrices, build_design
from .draws import cached_mlhs
from .inference import hessian_from_gradient, robust_covariance, t_ratios
from .likelihood import LikelihoodEngine
from .model import N_CATEGORIES
from .optimize import OptimizeResult, maximize, relative_gradient
from .params import ParameterStructure, ParameterVector

logger = logging.getLogger(__name__)


def starting_values(design: DesignMatrices) -> np.ndarray:
    """Free-parameter start: marginal thresholds, zero slopes, small spreads.

    Thresholds are logits of each stakeholder's cumulative response shares
    pooled over time. When a category is empty every count gets a 0.5
    pseudo-count first.
    """
    structure = ParameterStructure.from_design(design)
    if design.n_observations == 0:
        raise ValueError("cannot derive starting values from an empty dataset")
    p = structure.zeros()
    for s in range(len(STAKEHOLDERS)):
        y = design.ratings[..., s]
        counts = np.bincount(y[y >= 0], minlength=N_CATEGORIES).astype(float)
        if counts.sum() == 0:
            continue
        if np.any(counts == 0):
            counts += 0.5
        cum = np.cumsum(counts)[:-1] / counts.sum()
        p.thresholds[s] = logit(cum)
    p.stakeholder_sd = np.where(structure.random_stakeholder, 0.1, 0.0)
    p.common_sd = 0.1 if structure.random_common else 0.0
    p.reversion_sd = 0.1 if structure.random_reversion else 0.0
    p.alpha_sd = 0.1 if structure.random_alpha else 0.0
    p.reversion_base = 0.0
    p.alpha_base = design.horizon / 2
    return structure.to_free(p)


def _warn_empty_categories(design: DesignMatrices) -> None:
    for s, name in enumerate(STAKEHOLDERS):
        y = design.ratings[..., s]
        counts = np.bincount(y[y >= 0], minlength=N_CATEGORIES)
        empty = np.flatnonzero(counts == 0)
        if counts.sum() and empty.size:
            warnings.warn(f"{name}: rating(s) {', '.join(map(str, empty))} never observed; the adjacent cut "
                          "points have no finite maximum and estimation may not converge", UserWarning,
                          stacklevel=3)


def _maximize_with_boundary(engine, structure, theta0, *, max_iter, gtol, boundary_tol=1e-4):
    """BFGS, then pin standard deviations that sit at zero with the
    likelihood falling away from it, and re-optimize the rest.

    The absolute-value parametrization has a kink at zero. With a finite set
    of draws the likelihood is not symmetric there, so a zero spread is a
    corner maximum with a nonzero one-sided derivative.
    """
    sd = structure.sd_positions()
    pinned = np.zeros(0, dtype=int)
    theta = np.asarray(theta0, dtype=float).copy()
    iterations = evaluations = 0
    while True:
        free = np.setdiff1d(np.arange(structure.n_free), pinned)

        def fun(x, free=free):
            th = theta.copy()
            th[free] = x
            f, g = engine.loglik_and_gradient(th)
            return f, g[free]

        opt = maximize(fun, theta[free], grad=True, max_iter=max_iter - iterations, gtol=gtol)
        theta[free] = opt.x
        iterations += opt.n_iter
        evaluations += opt.n_eval
        g = engine.loglik_and_gradient(theta)[1]
        outward = g * np.where(theta >= 0, 1.0, -1.0)
        new = [k for k in sd if k not in pinned and abs(theta[k]) < boundary_tol and outward[k] < 0]
        if not new or iterations >= max_iter:
            break
        pinned = np.union1d(pinned, new).astype(int)
        theta[pinned] = 0.0
    full = OptimizeResult(theta, opt.fun, g, opt.converged, iterations, evaluations, opt.message)
    return full, pinned


@dataclass
class EstimationResult:
    """Estimates with robust inference.

    ``covariance`` and ``std_errors`` are in reporting space (thresholds as
    cut points, standard deviations nonnegative); ``covariance_free`` is the
    sandwich in the optimizer's parametrization. Standard deviations listed
    in ``boundary`` were fixed at zero and have NaN rows and columns.
    """

    structure: ParameterStructure
    theta: np.ndarray
    params: ParameterVector
    estimates_vector: np.ndarray
    covariance: np.ndarray
    covariance_free: np.ndarray
    std_errors: np.ndarray
    t_ratios: np.ndarray
    loglik: float
    per_individual: np.ndarray
    individual_ids: tuple[str, ...]
    converged: bool
    n_iter: int
    gradient_norm: float
    relative_gradient: float
    n_draws: int
    seed: int
    horizon: float
    message: str = ""
    n_observations: int = 0
    boundary: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def names(self) -> tuple[str, ...]:
        return self.structure.names

    @property
    def estimates(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.estimates_vector)))

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"estimate": self.estimates_vector, "std_error": self.std_errors, "t_ratio": self.t_ratios},
            index=pd.Index(self.names, name="parameter"),
        )


class ReversionOrderedLogit(BaseEstimator):
    """Multivariate ordered logit with workshop effects and opinion reversion,
    estimated by maximum simulated likelihood.

    Parameters
    ----------
    config : ModelConfig, dict, path or None
        Model specification; ``None`` gives the default (no covariates,
        stakeholder and common random effects, monthly calendar effects).
    n_draws : int, optional
        Draws per individual; defaults to the configuration's value.
    seed : int, optional
        Draw seed; defaults to the configuration's value.
    n_threads : int
        Threads for likelihood evaluation. Results do not depend on it.
    max_iter, gtol : optimizer settings.
    keep_incomplete : bool
        Keep individuals with unpaired workshop measurements.
    fix_sigmas : bool
        Drop every random component (all standard deviations fixed at 0).
    draw_cache : path, optional
        Directory for cached draw matrices.
    """

    def __init__(self, config=None, n_draws=None, seed=None, n_threads=1, max_iter=1000, gtol=1e-6,
                 keep_incomplete=False, fix_sigmas=False, draw_cache=None):
        self.config = config
        self.n_draws = n_draws
        self.seed = seed
        self.n_threads = n_threads
        self.max_iter = max_iter
        self.gtol = gtol
        self.keep_incomplete = keep_incomplete
        self.fix_sigmas = fix_sigmas
        self.draw_cache = draw_cache

    def _model_config(self):
        config = resolve_config(self.config)
        return config.without_random() if self.fix_sigmas else config

    def _engine(self, data: Dataset, config, structure=None):
        design = build_design(data, config)
        st = ParameterStructure.from_design(design)
        if structure is not None and st.names != structure.names:
            raise ValueError("dataset yields a different parameter layout than the fitted model")
        Q = int(self.n_draws if self.n_draws is not None else config.draws)
        seed = int(self.seed if self.seed is not None else config.seed)
        draws = cached_mlhs(design.n_individuals, Q, st.n_random, seed, self.draw_cache) if st.n_random else None
        return LikelihoodEngine(design, draws, threads=self.n_threads), Q, seed

    def fit(self, X: Dataset, y=None, start=None):
        """Estimate on a :class:`~revlogit.data.Dataset`.

        ``start`` optionally gives the free-parameter starting vector.
        """
        data = check_dataset(X)
        check_positive_int(self.n_threads, "n_threads")
        if self.n_draws is not None:
            check_positive_int(self.n_draws, "n_draws")
        if not self.keep_incomplete:
            data = data.complete_only()
        config = self._model_config()
        engine, Q, seed = self._engine(data, config)
        design, structure = engine.design, engine.structure
        _warn_empty_categories(design)
        theta0 = starting_values(design) if start is None else np.asarray(start, dtype=float)
        if theta0.shape != (structure.n_free,):
            raise ValueError(f"start has shape {theta0.shape}, expected ({structure.n_free},)")

        opt, pinned = _maximize_with_boundary(engine, structure, theta0, max_iter=self.max_iter, gtol=self.gtol)
        free = np.setdiff1d(np.arange(structure.n_free), pinned)
        final = engine.evaluate(opt.x)

        def free_gradient(x):
            th = opt.x.copy()
            th[free] = x
            return engine.loglik_and_gradient(th)[1][free]

        hess = hessian_from_gradient(free_gradient, opt.x[free])
        cov_free = np.full((structure.n_free, structure.n_free), np.nan)
        cov_free[np.ix_(free, free)] = robust_covariance(hess, final.scores[:, free])
        J = structure.jacobian(opt.x)[:, free]
        cov = J @ cov_free[np.ix_(free, free)] @ J.T
        cov = 0.5 * (cov + cov.T)
        cov[pinned, :] = np.nan
        cov[:, pinned] = np.nan
        est = structure.reported_from_free(opt.x)
        if len(pinned):
            logger.info("standard deviations at the zero boundary: %s", [structure.names[k] for k in pinned])
        if not opt.converged:
            warnings.warn(f"estimation did not converge: {opt.message}", ConvergenceWarning, stacklevel=2)
        if final.n_nonpositive_alpha:
            logger.info("%d individuals have a nonpositive reversion rate in some draw", final.n_nonpositive_alpha)

        self.design_ = design
        self.structure_ = structure
        self.result_ = EstimationResult(
            structure=structure,
            theta=opt.x,
            params=structure.from_free(opt.x),
            estimates_vector=est,
            covariance=cov,
            covariance_free=cov_free,
            std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
            boundary=tuple(structure.names[k] for k in pinned),
            t_ratios=t_ratios(est, cov),
            loglik=final.total,
            per_individual=final.per_individual,
            individual_ids=design.individual_ids,
            converged=opt.converged,
            n_iter=opt.n_iter,
            gradient_norm=float(np.max(np.abs(final.gradient[free]))) if free.size else 0.0,
            relative_gradient=relative_gradient(final.gradient[free], opt.x[free], final.total),
            n_draws=engine.n_draws if structure.n_random else Q,
            seed=seed,
            horizon=design.horizon,
            message=opt.message,
            n_observations=design.n_observations,
            diagnostics={
                "floored_individuals": final.n_floored,
                "nonpositive_alpha_individuals": final.n_nonpositive_alpha,
                "excluded_incomplete": 0 if self.keep_incomplete else len(check_dataset(X).incomplete),
                "function_evaluations": opt.n_eval,
            },
        )
        self.config_ = config
        return self

    def predict_proba(self, X: Dataset) -> np.ndarray:
        """Draw-averaged category probabilities, one row per rating in ``X``."""
        check_is_fitted(self, "result_")
        data = check_dataset(X)
        engine, _, _ = self._engine(data, self.config_, self.structure_)
        grid = engine.category_probabilities(self.result_.theta)
        pos = {iid: k for k, iid in enumerate(engine.design.individual_ids)}
        r = data.ratings
        ii = r["individual_id"].map(pos).to_numpy()
        tt = r["time_index"].to_numpy() - 1
        ss = r["stakeholder"].map(STAKEHOLDERS.index).to_numpy()
        return grid[ii, tt, ss]

    def predict(self, X: Dataset) -> np.ndarray:
        """Most probable rating for each observation."""
        return self.predict_proba(X).argmax(axis=1)

    def score(self, X: Dataset, y=None) -> float:
        """Simulated log-likelihood of ``X`` at the fitted parameters."""
        check_is_fitted(self, "result_")
        engine, _, _ = self._engine(check_dataset(X), self.config_, self.structure_)
        return engine.loglik(self.result_.theta)


def load_start(path: Path | str, structure: ParameterStructure) -> np.ndarray:
    """Free starting vector from an estimates/truth JSON file."""
    from .report import read_report

    report = read_report(path)
    return structure.to_free(structure.from_dict(report.estimates, default=structure.zeros()))
