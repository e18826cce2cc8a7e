"""Serialization of estimation results: JSON report, text table and CSVs.

The JSON report is also the format of simulation truth files, so an
estimate can be compared with (or started from) a truth file directly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ModelConfig
from .data import STAKEHOLDERS
from .params import ParameterStructure, ParameterVector

FORMAT = "revlogit-estimates/1"

_COLUMN_TITLES = {
    "government": "Government",
    "supermarkets": "Supermarkets",
    "food_industry": "Food industry",
    "farmers": "Farmers",
    "individuals": "Individuals",
}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def report_dict(names, estimates, std_errors=None, t_ratios=None, *, horizon=None, config=None,
                fit=None) -> dict:
    """Assemble the JSON document. Non-finite numbers become ``null``."""
    params = []
    for k, name in enumerate(names):
        params.append({
            "name": name,
            "estimate": _num(estimates[k]),
            "std_error": None if std_errors is None else _num(std_errors[k]),
            "t_ratio": None if t_ratios is None else _num(t_ratios[k]),
        })
    doc = {"format": FORMAT, "version": __version__, "horizon": _num(horizon) if horizon is not None else None}
    if fit is not None:
        doc["fit"] = fit
    if config is not None:
        doc["config"] = config.to_dict()
    doc["parameters"] = params
    return doc


def result_report(result, config: ModelConfig | None = None) -> dict:
    """JSON document for an :class:`~revlogit.estimator.EstimationResult`."""
    fit = {
        "loglik": _num(result.loglik),
        "converged": bool(result.converged),
        "iterations": int(result.n_iter),
        "relative_gradient": _num(result.relative_gradient),
        "max_abs_gradient": _num(result.gradient_norm),
        "message": result.message,
        "n_individuals": len(result.individual_ids),
        "n_observations": int(result.n_observations),
        "n_draws": int(result.n_draws),
        "seed": int(result.seed),
        **{k: int(v) for k, v in result.diagnostics.items()},
        "boundary": list(result.boundary),
    }
    return report_dict(result.names, result.estimates_vector, result.std_errors, result.t_ratios,
                       horizon=result.horizon, config=config, fit=fit)


def truth_report(structure: ParameterStructure, truth: ParameterVector, horizon, config=None) -> dict:
    """JSON document echoing simulation truth, with null standard errors."""
    return report_dict(structure.names, structure.to_reported(truth), horizon=horizon, config=config)


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")


@dataclass
class Report:
    """A parsed estimates or truth file."""

    estimates: dict[str, float]
    std_errors: dict[str, float | None] = field(default_factory=dict)
    horizon: float | None = None
    config: ModelConfig | None = None
    fit: dict = field(default_factory=dict)


def read_report(path) -> Report:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a revlogit estimates file")
    est, se = {}, {}
    for row in doc["parameters"]:
        est[row["name"]] = float("nan") if row["estimate"] is None else float(row["estimate"])
        se[row["name"]] = row.get("std_error")
    config = ModelConfig.from_dict(doc["config"]) if doc.get("config") else None
    return Report(est, se, doc.get("horizon"), config, doc.get("fit", {}))


def _cell(est, t):
    if est is None:
        return ""
    if t is None or not math.isfinite(t):
        return f"{est:8.2f}        "
    return f"{est:8.2f} ({t:5.2f})"


def table_text(names, estimates, t_ratios) -> str:
    """Estimates laid out with stakeholders, reversion and alpha as columns.

    Each cell is ``estimate (robust t-ratio)``. Parameters that do not fit
    the grid (thresholds, standard deviations, calendar effects) follow as a
    plain list.
    """
    vals = {n: (float(e), None if t is None else float(t)) for n, e, t in zip(names, estimates, t_ratios)}
    columns = list(STAKEHOLDERS) + ["reversion", "alpha"]
    titles = [_COLUMN_TITLES[s] for s in STAKEHOLDERS] + ["Reversion", "Alpha"]

    rows: list[str] = []
    for w in range(1, 6):
        rows.append(f"workshop_{w}")
    waves = sorted({n.split(".", 1)[1] for n in names if ".wave_" in n}, key=lambda s: int(s.split("_")[1]))
    rows.extend(waves)
    rows.append("base")
    terms = []
    for n in names:
        col, _, rest = n.partition(".")
        if col in columns and rest and not rest.startswith(("tau_", "workshop_", "wave_")) \
                and rest not in ("base", "sd") and rest not in terms:
            terms.append(rest)
    rows.extend(terms)

    width = 17
    out = [f"{'':24s}" + "".join(f"{t:>{width}s}" for t in titles)]
    used = set()
    for r in rows:
        cells = []
        for c in columns:
            key = f"{c}.{r}"
            if key in vals:
                used.add(key)
                cells.append(_cell(*vals[key]))
            else:
                cells.append("")
        if any(cells):
            out.append(f"{r:24s}" + "".join(f"{c:>{width}s}" for c in cells))
    rest = [n for n in names if n not in used]
    if rest:
        out.append("")
        for n in rest:
            e, t = vals[n]
            out.append(f"{n:36s}{_cell(e, t)}")
    return "\n".join(out) + "\n"


def _fmt(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ""


def write_matrix_csv(path, names, matrix) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", *names])
        for name, row in zip(names, np.asarray(matrix)):
            w.writerow([name, *map(_fmt, row)])


def write_estimation_outputs(result, out_dir, config: ModelConfig | None = None) -> list[Path]:
    """Write estimates.json, estimates.txt, covariance.csv and contributions.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "estimates.json", out / "estimates.txt", out / "covariance.csv", out / "contributions.csv"]
    write_json(result_report(result, config), paths[0])
    paths[1].write_text(table_text(result.names, result.estimates_vector, result.t_ratios),
                        encoding="utf-8", newline="\n")
    write_matrix_csv(paths[2], result.names, result.covariance)
    with paths[3].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["individual_id", "loglik"])
        for iid, ll in zip(result.individual_ids, result.per_individual):
            w.writerow([iid, _fmt(ll)])
    return paths
