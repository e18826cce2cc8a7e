import warnings

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import expit, logit
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from revlogit.config import ModelConfig
from revlogit.data import STAKEHOLDERS
from revlogit.design import build_design
from revlogit.estimator import ReversionOrderedLogit, starting_values
from revlogit.params import ParameterStructure
from revlogit.synthesis import simulate_dataset, reference_scenario


@pytest.fixture(scope="module")
def panel():
    data, truth = simulate_dataset(reference_scenario(40, seed=17))
    return data


def test_sklearn_contract():
    est = ReversionOrderedLogit(n_draws=50, seed=3)
    params = est.get_params()
    assert params["n_draws"] == 50 and params["seed"] == 3 and params["config"] is None
    other = clone(est).set_params(n_threads=2)
    assert other.n_threads == 2 and est.n_threads == 1
    with pytest.raises(NotFittedError):
        est.predict_proba(None)


def test_rejects_non_dataset():
    with pytest.raises(TypeError):
        ReversionOrderedLogit().fit(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ReversionOrderedLogit(n_threads=0).fit(simulate_dataset(reference_scenario(2))[0])


def test_starting_values(panel):
    config = ModelConfig(reversion_terms=("voting",), random_alpha=True)
    design = build_design(panel, config)
    structure = ParameterStructure.from_design(design)
    p = structure.from_free(starting_values(design))
    for s, name in enumerate(STAKEHOLDERS):
        y = panel.ratings.loc[panel.ratings.stakeholder == name, "rating"].to_numpy()
        counts = np.bincount(y, minlength=11).astype(float)
        if (counts == 0).any():
            counts += 0.5
        np.testing.assert_allclose(p.thresholds[s], logit(np.cumsum(counts)[:-1] / counts.sum()), atol=1e-12)
    assert np.all(p.workshop_effects == 0) and np.all(p.reversion_effects == 0)
    assert p.reversion_base == 0 and p.alpha_base == design.horizon / 2
    assert p.alpha_sd == 0.1 and p.common_sd == 0.1 and np.all(p.stakeholder_sd == 0.1)


def closed_form_fit(data):
    """Per-stakeholder ordered logit on workshop indicators, coded from scratch."""
    out = {}
    r = data.ratings
    for name in STAKEHOLDERS:
        sub = r[r.stakeholder == name]
        y = sub["rating"].to_numpy()
        X = (np.arange(1, 6)[None, :] * 2 <= sub["time_index"].to_numpy()[:, None]).astype(float)

        def negll(par):
            tau = np.concatenate([[-np.inf], np.cumsum(np.r_[par[0], np.exp(par[1:10])]), [np.inf]])
            v = X @ par[10:]
            return -np.sum(np.log(expit(tau[y + 1] - v) - expit(tau[y] - v)))

        counts = np.bincount(y, minlength=11) + 0.5
        cut = logit(np.cumsum(counts)[:-1] / counts.sum())
        x0 = np.r_[cut[0], np.log(np.diff(cut)), np.zeros(5)]
        res = minimize(negll, x0, method="BFGS", options={"gtol": 1e-9})
        tau = np.cumsum(np.r_[res.x[0], np.exp(res.x[1:10])])
        out.update({f"{name}.tau_{k + 1}": v for k, v in enumerate(tau)})
        out.update({f"{name}.workshop_{w + 1}": v for w, v in enumerate(res.x[10:])})
    return out


def test_degenerate_mixing_matches_closed_form(panel):
    config = ModelConfig(reversion=False, wave_effects=False, calendar="none")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = ReversionOrderedLogit(config=config, n_draws=1, fix_sigmas=True, gtol=1e-9).fit(panel)
    ref = closed_form_fit(panel)
    got = est.result_.estimates
    assert set(got) == set(ref)
    for name, value in ref.items():
        assert got[name] == pytest.approx(value, abs=1e-4), name


@pytest.fixture(scope="module")
def fitted(panel):
    config = reference_scenario().config
    return ReversionOrderedLogit(config=config, n_draws=20, seed=5, max_iter=400).fit(panel)


def test_fit_result(fitted, panel):
    res = fitted.result_
    summary = res.summary()
    assert list(summary.columns) == ["estimate", "std_error", "t_ratio"]
    assert len(summary) == res.structure.n_free
    assert res.covariance.shape == (len(summary),) * 2
    np.testing.assert_allclose(res.covariance, res.covariance.T)
    on_boundary = summary.index.isin(res.boundary)
    assert np.all(res.std_errors[~on_boundary] > 0)
    # a spread that collapses to zero is pinned there and reported without a standard error
    assert all(name.endswith(".sd") for name in res.boundary)
    assert np.all(summary.loc[on_boundary, "estimate"] == 0)
    assert summary.loc[on_boundary, "std_error"].isna().all()
    assert res.per_individual.sum() == pytest.approx(res.loglik)
    assert res.converged
    assert res.relative_gradient < 1e-6


def test_predictions(fitted, panel):
    proba = fitted.predict_proba(panel)
    assert proba.shape == (len(panel.ratings), 11)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    pred = fitted.predict(panel)
    assert pred.min() >= 0 and pred.max() <= 10
    assert fitted.score(panel) == pytest.approx(fitted.result_.loglik, rel=1e-12)


def test_layout_mismatch(fitted):
    data, _ = simulate_dataset(reference_scenario(20, n_waves=2, seed=9))
    with pytest.raises(ValueError, match="layout"):
        fitted.predict_proba(data)


def test_warm_start_reaches_same_optimum(fitted, panel):
    again = clone(fitted).fit(panel, start=fitted.result_.theta)
    assert again.result_.loglik == pytest.approx(fitted.result_.loglik, abs=1e-6)
