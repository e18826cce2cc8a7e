"""Command-line interface: ``revlogit estimate|simulate|describe|curves``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 estimation did not
converge (outputs are still written).
"""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import itertools
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import DEFAULT_SEED, ConfigError, ModelConfig, dump_config, load_config
from .data import DataValidationError, load_dataset, write_dataset
from .design import DesignError
from .estimator import ReversionOrderedLogit, load_start
from .report import read_report, truth_report, write_estimation_outputs, write_json
from .reporting import curves_frame, describe, reversion_curves, trajectories
from .synthesis import simulate_dataset, reference_scenario

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NOT_CONVERGED = 0, 1, 2, 3

logger = logging.getLogger("revlogit")


class _IOFailure(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise _IOFailure(f"input file not found: {p}")
    return p


def _write_csv(frame, path) -> None:
    frame.to_csv(path, index=False, lineterminator="\n", float_format=None, na_rep="")


def _manifest(args, out: Path, started: str, *, inputs=(), seed=None, draws=None, convergence=None) -> None:
    doc = {
        "command": args.command,
        "config": None if getattr(args, "config", None) is None else str(args.config),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "draws": draws,
        "threads": getattr(args, "threads", None),
        "version": __version__,
        "started": started,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "convergence": convergence,
    }
    write_json(doc, out / "manifest.json")


def _load_inputs(args):
    paths = [_require(args.ratings), _require(args.individuals), _require(args.schedule)]
    config = load_config(_require(args.config)) if args.config else ModelConfig()
    data = load_dataset(*paths, levels=config.levels or None, horizon=config.horizon)
    return data, config, paths


def cmd_estimate(args) -> int:
    started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    data, config, inputs = _load_inputs(args)
    if args.config:
        inputs.append(Path(args.config))
    model = ReversionOrderedLogit(config=config, n_draws=args.draws, seed=args.seed, n_threads=args.threads,
                                  max_iter=args.max_iter, keep_incomplete=args.keep_incomplete,
                                  fix_sigmas=args.fix_sigmas is not None, draw_cache=args.draw_cache)
    start = None
    if args.start:
        inputs.append(_require(args.start))
        from .design import build_design
        from .params import ParameterStructure

        fit_data = data if args.keep_incomplete else data.complete_only()
        structure = ParameterStructure.from_design(build_design(fit_data, model._model_config()))
        start = load_start(args.start, structure)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model.fit(data, start=start)
    for w in caught:
        logger.warning("%s", w.message)
    res = model.result_
    out = Path(args.out)
    write_estimation_outputs(res, out, model.config_)
    convergence = {"converged": res.converged, "iterations": res.n_iter, "message": res.message,
                   "relative_gradient": res.relative_gradient, "loglik": res.loglik}
    _manifest(args, out, started, inputs=inputs, seed=res.seed, draws=res.n_draws, convergence=convergence)
    logger.info("log-likelihood %.6f after %d iterations (%s)", res.loglik, res.n_iter, res.message)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    spec = reference_scenario(args.n_per_wave, args.waves, seed=args.seed, alpha_base=args.alpha_base,
                           steep_alpha=args.steep_alpha, reversion_sd=args.reversion_sd, calendar=args.calendar)
    data, truth = simulate_dataset(spec)
    out = Path(args.out)
    write_dataset(data, out)
    from .design import build_design
    from .params import ParameterStructure

    design = build_design(data, spec.config)
    write_json(truth_report(ParameterStructure.from_design(design), truth, design.horizon, spec.config),
               out / "truth.json")
    dump_config(spec.config, out / "config.yaml")
    _manifest(args, out, started, seed=args.seed)
    return EXIT_OK


def cmd_describe(args) -> int:
    started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    data, _, inputs = _load_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(describe(data), out / "descriptives.csv")
    _write_csv(trajectories(data), out / "trajectories.csv")
    _manifest(args, out, started, inputs=inputs)
    return EXIT_OK


def _parse_group(text: str) -> dict[str, str]:
    if text.strip() in ("", "base"):
        return {}
    setting = {}
    for part in text.split(","):
        name, eq, level = part.partition("=")
        if not eq or not name.strip():
            raise ValueError(f"group setting {part!r} is not of the form name=value")
        setting[name.strip()] = level.strip()
    return setting


def _default_groups(estimates) -> list[dict[str, str]]:
    """Every on/off combination of the categorical reversion and alpha dummies."""
    dummies = []
    for n in estimates:
        eq, _, term = n.partition(".")
        if eq in ("reversion", "alpha") and "=" in term and term not in dummies:
            dummies.append(term)
    names = {}
    for term in dummies:
        name, _, level = term.partition("=")
        names.setdefault(name, []).append(level)
    options = [[None] + levels for levels in names.values()]
    groups = []
    for combo in itertools.product(*options):
        groups.append({name: lev for name, lev in zip(names, combo) if lev is not None})
    return groups


def cmd_curves(args) -> int:
    started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    report = read_report(_require(args.estimates))
    if report.horizon is None:
        raise ValueError(f"{args.estimates}: no horizon recorded")
    groups = [_parse_group(g) for g in args.group] if args.group else _default_groups(report.estimates)
    curves = reversion_curves(report, groups, step=args.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(curves_frame(curves), out / "curves.csv")
    meta = {
        "coding": "name=level terms are 0/1 dummies against the base level; omitted covariates sit at base; "
                  "random spreads are set to zero",
        "horizon": report.horizon,
        "groups": [{"group": c.label, "setting": c.setting, "reversion": c.rho, "alpha": c.alpha} for c in curves],
    }
    write_json(meta, out / "curves.json")
    _manifest(args, out, started, inputs=[Path(args.estimates)])
    return EXIT_OK


def _data_args(p) -> None:
    p.add_argument("--ratings", required=True, help="ratings CSV")
    p.add_argument("--individuals", required=True, help="individuals CSV")
    p.add_argument("--schedule", required=True, help="workshop schedule CSV")
    p.add_argument("--config", help="model configuration (YAML)")


def _shared(p, *, seed_default=None) -> None:
    p.add_argument("--seed", type=int, default=seed_default, help="random seed")
    p.add_argument("--draws", type=int, default=None, help="draws per individual")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revlogit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the model by maximum simulated likelihood")
    _data_args(p)
    _shared(p)
    p.add_argument("--keep-incomplete", action="store_true",
                   help="keep individuals with a workshop measured only at its beginning or end")
    p.add_argument("--fix-sigmas", type=float, choices=[0.0], default=None, metavar="0",
                   help="fix every random-component standard deviation at 0")
    p.add_argument("--start", help="starting values from an estimates or truth JSON file")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--draw-cache", help="directory for cached draw matrices")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="simulate a panel from the reference scenario")
    _shared(p, seed_default=DEFAULT_SEED)
    p.add_argument("--n-per-wave", type=int, default=170, help="individuals per wave")
    p.add_argument("--waves", type=int, default=3)
    p.add_argument("--alpha-base", type=float, default=None, help="true base reversion rate (default horizon/3)")
    p.add_argument("--steep-alpha", action="store_true", help="use the steep reversion-rate block (base 119.17 with covariate shifts)")
    p.add_argument("--reversion-sd", type=float, default=0.0)
    p.add_argument("--calendar", default="none", choices=["month", "week", "day", "none"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("describe", help="descriptive table and trajectories")
    _data_args(p)
    _shared(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("curves", help="reversion curves from an estimates file")
    p.add_argument("--estimates", required=True, help="estimates.json from 'estimate' (or a truth file)")
    p.add_argument("--group", action="append",
                   help="covariate setting such as 'location=rural,voting=abstain' or 'base'; repeatable")
    p.add_argument("--step", type=float, default=1.0, help="day spacing of the curve points")
    _shared(p)
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    for name in ("seed", "draws", "threads"):
        value = getattr(args, name, None)
        if value is not None and (value < 0 or (name != "seed" and value < 1)):
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_INVALID
    try:
        return args.func(args)
    except (_IOFailure, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, _IOFailure) else f"{exc.strerror}: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_IO
    except (DataValidationError, ConfigError, DesignError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
