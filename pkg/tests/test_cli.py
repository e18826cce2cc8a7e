import json

import numpy as np
import pandas as pd
import pytest

from revlogit.cli import EXIT_INVALID, EXIT_IO, EXIT_NOT_CONVERGED, EXIT_OK, main

SMALL_CONFIG = """\
draws: 10
calendar: none
waves: false
reversion:
  enabled: true
random:
  stakeholder: true
  common: true
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--n-per-wave", "12", "--waves", "2", "--seed", "3", "--out", str(out)]) == EXIT_OK
    (out / "small.yaml").write_text(SMALL_CONFIG)
    return out


def data_args(d, config=None):
    args = ["--ratings", str(d / "ratings.csv"), "--individuals", str(d / "individuals.csv"),
            "--schedule", str(d / "schedule.csv")]
    if config:
        args += ["--config", str(d / config)]
    return args


def test_simulate_is_byte_identical(tmp_path, sim_dir):
    out = tmp_path / "again"
    assert main(["simulate", "--n-per-wave", "12", "--waves", "2", "--seed", "3", "--out", str(out)]) == EXIT_OK
    for name in ("ratings.csv", "individuals.csv", "schedule.csv", "truth.json", "config.yaml"):
        assert (out / name).read_bytes() == (sim_dir / name).read_bytes(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 3


def test_missing_input_is_io_error(tmp_path, sim_dir, capsys):
    args = data_args(sim_dir)
    missing = tmp_path / "nope.csv"
    args[args.index("--schedule") + 1] = str(missing)
    assert main(["describe", *args, "--out", str(tmp_path / "d")]) == EXIT_IO
    assert str(missing) in capsys.readouterr().err


def test_invalid_data_exit_code(tmp_path, sim_dir, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in ("individuals.csv", "schedule.csv"):
        (bad / name).write_bytes((sim_dir / name).read_bytes())
    ratings = pd.read_csv(sim_dir / "ratings.csv")
    ratings.loc[3, "rating"] = 11
    ratings.to_csv(bad / "ratings.csv", index=False)
    assert main(["describe", *data_args(bad), "--out", str(tmp_path / "d")]) == EXIT_INVALID
    assert "rating" in capsys.readouterr().err


def test_nonpositive_threads_rejected(tmp_path, sim_dir):
    assert main(["estimate", *data_args(sim_dir), "--threads", "0", "--out", str(tmp_path)]) == EXIT_INVALID


def test_describe_on_constant_ratings(tmp_path, sim_dir):
    flat = tmp_path / "flat"
    flat.mkdir()
    for name in ("individuals.csv", "schedule.csv"):
        (flat / name).write_bytes((sim_dir / name).read_bytes())
    ratings = pd.read_csv(sim_dir / "ratings.csv")
    ratings["rating"] = 7
    ratings.to_csv(flat / "ratings.csv", index=False)
    out = tmp_path / "desc"
    assert main(["describe", *data_args(flat), "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out / "descriptives.csv")
    assert list(table["stakeholder"])[0] == "All"
    assert np.allclose(table["change"], 0.0)
    assert np.allclose(table["pooled_mean"], 7.0)
    assert np.allclose(table["p_value"], 1.0)
    traj = pd.read_csv(out / "trajectories.csv")
    assert len(traj) == 50 and np.allclose(traj["mean"], 7.0)


def test_curves_from_truth(tmp_path, sim_dir):
    out = tmp_path / "curves"
    assert main(["curves", "--estimates", str(sim_dir / "truth.json"), "--out", str(out)]) == EXIT_OK
    curves = pd.read_csv(out / "curves.csv")
    meta = json.loads((out / "curves.json").read_text())
    assert {g["group"] for g in meta["groups"]} == set(curves["group"])
    for g in meta["groups"]:
        c = curves[curves["group"] == g["group"]]
        assert c["percent_remaining"].iloc[0] == pytest.approx(100.0)
        assert c["percent_remaining"].iloc[-1] == pytest.approx(100.0 * (1 - g["reversion"]), abs=1e-9)


def test_curves_with_zero_reversion(tmp_path, sim_dir):
    doc = json.loads((sim_dir / "truth.json").read_text())
    for row in doc["parameters"]:
        if row["name"].startswith("reversion."):
            row["estimate"] = 0.0
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "curves"
    assert main(["curves", "--estimates", str(path), "--group", "base", "--group", "location=rural",
                 "--out", str(out)]) == EXIT_OK
    curves = pd.read_csv(out / "curves.csv")
    assert set(curves["group"]) == {"base", "location=rural"}
    assert np.allclose(curves["percent_remaining"], 100.0)


def test_curves_unknown_covariate(tmp_path, sim_dir, capsys):
    code = main(["curves", "--estimates", str(sim_dir / "truth.json"), "--group", "height=tall",
                 "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    assert "not in the reversion" in capsys.readouterr().err


def test_estimate_writes_outputs(tmp_path, sim_dir):
    out = tmp_path / "est"
    code = main(["estimate", *data_args(sim_dir, "small.yaml"), "--seed", "4", "--out", str(out)])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    for name in ("estimates.json", "estimates.txt", "covariance.csv", "contributions.csv", "manifest.json"):
        assert (out / name).is_file(), name
    doc = json.loads((out / "estimates.json").read_text())
    assert doc["fit"]["n_draws"] == 10 and doc["fit"]["seed"] == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["draws"] == 10 and len(manifest["inputs"]) == 4
    assert manifest["convergence"]["converged"] == (code == EXIT_OK)
    cov = pd.read_csv(out / "covariance.csv", index_col=0)
    assert list(cov.index) == [p["name"] for p in doc["parameters"]]


def test_estimate_fixed_sigmas(tmp_path, sim_dir):
    out = tmp_path / "est"
    code = main(["estimate", *data_args(sim_dir, "small.yaml"), "--draws", "1", "--fix-sigmas", "0",
                 "--out", str(out)])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    doc = json.loads((out / "estimates.json").read_text())
    names = [p["name"] for p in doc["parameters"]]
    assert "reversion.base" in names
    assert not [n for n in names if n.endswith(".sd")]


def test_fix_sigmas_only_accepts_zero(tmp_path, sim_dir):
    with pytest.raises(SystemExit):
        main(["estimate", *data_args(sim_dir), "--fix-sigmas", "0.5", "--out", str(tmp_path)])


def test_fixed_sigmas_match_closed_form_run(tmp_path, sim_dir):
    closed = tmp_path / "closed.yaml"
    closed.write_text(SMALL_CONFIG.replace("stakeholder: true", "stakeholder: false").replace("common: true",
                                                                                               "common: false"))
    runs = {}
    for label, extra in (("fixed", ["--config", str(sim_dir / "small.yaml"), "--draws", "1", "--fix-sigmas", "0"]),
                         ("closed", ["--config", str(closed)])):
        args = data_args(sim_dir) + extra + ["--out", str(tmp_path / label)]
        assert main(["estimate", *args]) in (EXIT_OK, EXIT_NOT_CONVERGED)
        doc = json.loads((tmp_path / label / "estimates.json").read_text())
        runs[label] = {p["name"]: p["estimate"] for p in doc["parameters"]}
    assert runs["fixed"].keys() == runs["closed"].keys()
    for name, value in runs["closed"].items():
        assert runs["fixed"][name] == pytest.approx(value, abs=1e-8), name
