import numpy as np
import pytest
from dataclasses import replace

from revlogit.data import write_dataset
from revlogit.model import ordered_probs
from revlogit.params import ParameterStructure
from revlogit.design import build_design
from revlogit.synthesis import (
    DEFAULT_COVARIATES,
    ScenarioSpec,
    default_schedule,
    sample_ratings,
    simulate_dataset,
    reference_scenario,
)


def test_sampling_matches_category_probabilities():
    rng = np.random.default_rng(5)
    tau = np.sort(rng.normal(scale=2, size=10))
    n = 100_000
    y = sample_ratings(np.full(n, 0.4), tau, rng.random(n))
    p = ordered_probs(0.4, tau)
    freq = np.bincount(y, minlength=11) / n
    se = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(freq - p) <= 3 * se + 1e-12)


def test_degenerate_distribution():
    spec = reference_scenario(5, seed=1, stakeholder_sd=0.0, common_sd=0.0)
    truth = {k: 0.0 for k in spec.truth if not k.endswith(".sd")}
    tau = [-24, -23, -22, -21, -20, 20, 21, 22, 23, 24]
    for name in {k.split(".")[0] for k in spec.truth if ".tau_" in k}:
        for k, value in enumerate(tau, start=1):
            truth[f"{name}.tau_{k}"] = value
    truth["alpha.base"] = 3.0
    data, _ = simulate_dataset(replace(spec, truth=truth))
    assert (data.ratings["rating"] == 5).all()


def test_individuals_rise_over_the_event():
    data, _ = simulate_dataset(reference_scenario(170, seed=8))
    r = data.ratings[data.ratings.stakeholder == "individuals"]
    assert r.loc[r.time_index == 10, "rating"].mean() > r.loc[r.time_index == 1, "rating"].mean()


def test_byte_identical_reruns(tmp_path):
    spec = reference_scenario(10, seed=4)
    a = write_dataset(simulate_dataset(spec)[0], tmp_path / "a")
    b = write_dataset(simulate_dataset(spec)[0], tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = write_dataset(simulate_dataset(replace(spec, seed=5))[0], tmp_path / "c")
    assert a["ratings"].read_bytes() != c["ratings"].read_bytes()


def test_full_panel_and_truth_echo():
    spec = reference_scenario(4, seed=2)
    data, truth = simulate_dataset(spec)
    assert len(data.ratings) == 12 * 10 * 5
    assert not data.incomplete
    structure = ParameterStructure.from_design(build_design(data, spec.config))
    echoed = structure.as_dict(truth)
    for name, value in spec.truth.items():
        assert echoed[name] == pytest.approx(value)


def test_spec_validation():
    sched = default_schedule(2)
    with pytest.raises(ValueError):
        ScenarioSpec((10,), sched, DEFAULT_COVARIATES, reference_scenario().config, {})
    bad = {"gender": {"female": 0.5, "male": 0.6}}
    with pytest.raises(ValueError):
        ScenarioSpec((10, 10), sched, bad, reference_scenario().config, {})
    with pytest.raises(ValueError, match="not in the model"):
        simulate_dataset(replace(reference_scenario(3), truth={"nonsense.x": 1.0}))


def test_default_schedule_horizon():
    assert default_schedule(3).horizon == 17
