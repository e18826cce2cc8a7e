import numpy as np
import pandas as pd
import pytest

from revlogit.config import ConfigError, ModelConfig, dump_config, load_config
from revlogit.data import STAKEHOLDERS
from revlogit.design import DesignError, build_design, expand_categorical
from revlogit.params import ParameterStructure
from revlogit.synthesis import simulate_dataset, reference_scenario


class TestConfig:
    def test_yaml_roundtrip(self, tmp_path):
        cfg = ModelConfig(stakeholder_terms={"farmers": ("location=rural",)}, reversion_terms=("voting",),
                          random_stakeholder=(True, False, True, True, False), calendar="week",
                          numeric=("age",), bases={"voting": "left"}, draws=200, seed=5, horizon=20)
        path = tmp_path / "m.yaml"
        dump_config(cfg, path)
        assert load_config(path) == cfg

    def test_defaults_from_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == ModelConfig()
        assert cfg.n_random == 6

    @pytest.mark.parametrize("doc", [
        {"stakeholders": {"banks": ["x"]}},
        {"calendar": "year"},
        {"draws": 0},
        {"colour": "red"},
        {"reversion": {"enabled": False, "covariates": ["voting"]}},
        {"random": {"stakeholder": ["banks"]}},
    ])
    def test_rejections(self, doc):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict(doc)

    def test_without_random(self):
        cfg = ModelConfig(random_reversion=True).without_random()
        assert cfg.n_random == 0


@pytest.fixture(scope="module")
def panel():
    data, _ = simulate_dataset(reference_scenario(6, seed=3))
    return data


class TestDesign:
    def test_dummies_sum_to_one(self, panel):
        dummies = expand_categorical(panel.individuals["voting"])
        np.testing.assert_array_equal(dummies.sum(axis=1), 1.0)
        assert "voting=missing" in dummies.columns

    def test_zero_covariates(self, panel):
        d = build_design(panel, ModelConfig(calendar="month"))
        assert all(x.shape[1] == 0 for x in d.stakeholder_x)
        assert d.reversion_x.shape[1] == 0
        assert d.wave_dummies.shape[1] == 2
        assert d.calendar_labels == d.period_labels[1:]
        assert len(d.period_labels) >= 2

    def test_categorical_expansion_skips_base(self, panel):
        d = build_design(panel, ModelConfig(reversion_terms=("voting",), bases={"voting": "left"}))
        assert d.reversion_terms == ("voting=abstain", "voting=missing", "voting=right")
        d = build_design(panel, ModelConfig(reversion_terms=("voting",)))
        assert d.reversion_terms[0] == "voting=left"  # first sorted non-missing level is the base

    def test_unknown_covariate_lists_valid(self, panel):
        with pytest.raises(DesignError, match="valid names: gender"):
            build_design(panel, ModelConfig(reversion_terms=("age",)))
        with pytest.raises(DesignError, match="no level"):
            build_design(panel, ModelConfig(reversion_terms=("voting=green",)))

    def test_duplicate_term(self, panel):
        with pytest.raises(DesignError):
            build_design(panel, ModelConfig(reversion_terms=("voting", "voting=right")))

    def test_numeric_covariate(self, panel):
        data = panel.subset(panel.individual_ids)
        data.individuals["age"] = [str(20 + k) for k in range(len(data.individuals))]
        d = build_design(data, ModelConfig(stakeholder_terms={"farmers": ("age",)}, numeric=("age",)))
        assert d.stakeholder_x[3][:, 0].tolist() == list(range(20, 20 + len(data.individuals)))

    def test_observation_table(self, panel):
        d = build_design(panel, ModelConfig(calendar="month"))
        tab = d.observation_table()
        assert len(tab) == len(panel.ratings) == d.n_observations
        end2 = tab[(tab.time_index == 4)]
        assert (end2["days_since_2"] == 0).all() and (end2["workshop_3"] == 0).all()

    def test_horizon_override(self, panel):
        assert build_design(panel, ModelConfig(horizon=30)).horizon == 30.0
        with pytest.raises(ValueError):
            build_design(panel, ModelConfig(horizon=5))


class TestParameterStructure:
    @pytest.fixture
    def structure(self, panel):
        cfg = ModelConfig(stakeholder_terms={"farmers": ("location=rural",)}, reversion_terms=("voting",),
                          alpha_terms=("gender=female",), random_reversion=True, random_alpha=True,
                          random_stakeholder=(True, False, True, False, True))
        return ParameterStructure.from_design(build_design(panel, cfg))

    def test_names_unique_and_layout(self, structure):
        names = structure.names
        assert len(set(names)) == len(names)
        assert "farmers.location=rural" in names and "supermarkets.sd" not in names
        assert structure.random_dims == {"reversion": 0, "alpha": 1, "government": 2, "food_industry": 3,
                                         "individuals": 4, "common": 5}

    def test_free_roundtrip(self, structure, rng):
        theta = rng.normal(size=structure.n_free)
        back = structure.to_free(structure.from_free(theta))
        sd = structure.sd_positions()
        expected = theta.copy()
        expected[sd] = np.abs(theta[sd])
        np.testing.assert_allclose(back, expected, rtol=1e-12, atol=1e-12)
        p = structure.from_free(theta)
        assert np.all(np.diff(p.thresholds, axis=1) > 0)

    def test_jacobian_against_differences(self, structure, rng):
        theta = rng.normal(size=structure.n_free)
        J = structure.jacobian(theta)
        h = 1e-6
        for k in range(structure.n_free):
            e = np.zeros_like(theta)
            e[k] = h
            col = (structure.reported_from_free(theta + e) - structure.reported_from_free(theta - e)) / (2 * h)
            np.testing.assert_allclose(J[:, k], col, atol=1e-7)

    def test_dict_roundtrip(self, structure, rng):
        p = structure.from_free(rng.normal(size=structure.n_free))
        d = structure.as_dict(p)
        np.testing.assert_allclose(structure.to_reported(structure.from_dict(d)), structure.to_reported(p))
        with pytest.raises(KeyError):
            structure.from_dict({})
