"""Domain types and CSV ingestion for repeated stakeholder ratings.

Three long-format files describe a deliberative event:

``ratings.csv``
    ``individual_id, wave, time_index, stakeholder, rating, date``
``individuals.csv``
    ``individual_id, wave`` followed by one column per covariate; an empty
    cell is the ``missing`` level.
``schedule.csv``
    ``wave, workshop, date``
"""
from __future__ import annotations

import datetime as dt
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .model import N_WORKSHOPS, workshop_indicators

logger = logging.getLogger(__name__)

STAKEHOLDERS = ("government", "supermarkets", "food_industry", "farmers", "individuals")
N_TIMES = 2 * N_WORKSHOPS
MISSING = "missing"

RATINGS_COLUMNS = ("individual_id", "wave", "time_index", "stakeholder", "rating", "date")
SCHEDULE_COLUMNS = ("wave", "workshop", "date")

_INT = re.compile(r"^\s*-?\d+\s*$")


class DataValidationError(ValueError):
    """Raised when an input file violates its schema or a domain rule."""


@dataclass(frozen=True)
class RatingObservation:
    individual_id: str
    wave: int
    time_index: int
    stakeholder: str
    rating: int
    measurement_date: dt.date


@dataclass(frozen=True)
class IndividualRecord:
    individual_id: str
    wave: int
    covariates: Mapping[str, str]


@dataclass(frozen=True)
class WaveSchedule:
    """Workshop dates per wave and the reversion horizon in days.

    When ``horizon`` is omitted it defaults to the longest gap between
    consecutive workshops in any wave.
    """

    dates: Mapping[int, tuple[dt.date, ...]]
    horizon: int | None = None

    def __post_init__(self):
        clean = {}
        for wave, days in self.dates.items():
            days = tuple(days)
            if len(days) != N_WORKSHOPS:
                raise DataValidationError(f"wave {wave} has {len(days)} workshop dates, expected {N_WORKSHOPS}")
            if any(b <= a for a, b in zip(days, days[1:])):
                raise DataValidationError(f"workshop dates of wave {wave} are not strictly increasing")
            clean[int(wave)] = days
        object.__setattr__(self, "dates", dict(sorted(clean.items())))
        gap = self.max_gap
        if self.horizon is None:
            object.__setattr__(self, "horizon", max(gap, 1))
        elif self.horizon < gap or self.horizon <= 0:
            raise DataValidationError(f"horizon {self.horizon} is shorter than the longest workshop gap {gap}")

    @property
    def waves(self) -> tuple[int, ...]:
        return tuple(self.dates)

    @property
    def max_gap(self) -> int:
        gaps = [(b - a).days for days in self.dates.values() for a, b in zip(days, days[1:])]
        return max(gaps, default=0)

    def measurement_date(self, wave: int, time_index: int) -> dt.date:
        """Both measurements of a workshop are taken on the workshop's day."""
        if not 1 <= time_index <= N_TIMES:
            raise ValueError(f"time index must lie in 1..{N_TIMES}, got {time_index}")
        return self.dates[wave][(time_index - 1) // 2]

    def with_horizon(self, horizon: int | None) -> "WaveSchedule":
        return WaveSchedule(self.dates, horizon)


def elapsed_days(schedule: WaveSchedule, wave: int, workshop: int, time_index: int) -> int:
    """Days between workshop ``workshop`` and the measurement at ``time_index``."""
    if wave not in schedule.dates:
        raise KeyError(f"unknown wave {wave}")
    if not workshop_indicators(time_index)[workshop - 1]:
        raise ValueError(f"workshop {workshop} has not occurred by time index {time_index}")
    return (schedule.measurement_date(wave, time_index) - schedule.dates[wave][workshop - 1]).days


def elapsed_days_table(schedule: WaveSchedule, wave: int) -> np.ndarray:
    """Array ``(10, 5)`` of elapsed days, zero where a workshop has not occurred."""
    out = np.zeros((N_TIMES, N_WORKSHOPS))
    for t in range(1, N_TIMES + 1):
        for w in range(1, t // 2 + 1):
            out[t - 1, w - 1] = elapsed_days(schedule, wave, w, t)
    return out


def period_labels(dates, granularity: str = "month") -> list[str]:
    """Calendar-period label for each date."""
    dates = pd.to_datetime(pd.Series(list(dates)))
    if granularity == "month":
        return list(dates.dt.strftime("%Y-%m"))
    if granularity == "week":
        iso = dates.dt.isocalendar()
        return [f"{y:04d}-W{w:02d}" for y, w in zip(iso["year"], iso["week"])]
    if granularity == "day":
        return list(dates.dt.strftime("%Y-%m-%d"))
    if granularity == "none":
        return ["all"] * len(dates)
    raise ValueError(f"unknown calendar granularity {granularity!r}")


@dataclass(frozen=True)
class Dataset:
    """Validated ratings panel.

    ``ratings`` holds one row per observation; ``individuals`` is indexed by
    ``individual_id`` with a ``wave`` column and string-valued covariates.
    ``incomplete`` lists individuals with an unpaired workshop measurement.
    """

    individuals: pd.DataFrame
    ratings: pd.DataFrame
    schedule: WaveSchedule
    incomplete: tuple[str, ...] = ()
    unknown_levels: Mapping[str, int] = field(default_factory=dict)

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.individuals.columns if c != "wave")

    @property
    def individual_ids(self) -> tuple[str, ...]:
        return tuple(self.individuals.index)

    def __len__(self):
        return len(self.ratings)

    def observations(self):
        for row in self.ratings.itertuples(index=False):
            yield RatingObservation(row.individual_id, row.wave, row.time_index,
                                    row.stakeholder, row.rating, row.date)

    def records(self):
        covs = self.covariate_names
        for iid, row in self.individuals.iterrows():
            yield IndividualRecord(iid, int(row["wave"]), {c: row[c] for c in covs})

    def calendar_periods(self, granularity: str = "month") -> dict[dt.date, int]:
        """Map each measurement date to a period index ``1..p``."""
        dates = sorted(set(self.ratings["date"]))
        labels = period_labels(dates, granularity)
        order = {lab: k + 1 for k, lab in enumerate(sorted(set(labels)))}
        return {d: order[lab] for d, lab in zip(dates, labels)}

    def subset(self, ids: Sequence[str]) -> "Dataset":
        keep = set(ids)
        individuals = self.individuals.loc[[i for i in self.individuals.index if i in keep]]
        ratings = self.ratings[self.ratings["individual_id"].isin(keep)].reset_index(drop=True)
        incomplete = tuple(i for i in self.incomplete if i in keep)
        return Dataset(individuals, ratings, self.schedule, incomplete, dict(self.unknown_levels))

    def complete_only(self) -> "Dataset":
        """Drop individuals flagged incomplete."""
        flagged = set(self.incomplete)
        return self.subset([i for i in self.individuals.index if i not in flagged])


def _parse_int(value, what, line, lo=None, hi=None):
    if not isinstance(value, str) or not _INT.match(value):
        raise DataValidationError(f"line {line}: {what} {value!r} is not an integer")
    out = int(value)
    if (lo is not None and out < lo) or (hi is not None and out > hi):
        raise DataValidationError(f"line {line}: {what} {out} outside {lo}..{hi}")
    return out


def _parse_date(value, line):
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError:
        raise DataValidationError(f"line {line}: date {value!r} is not ISO-8601") from None


def _read_csv(path, columns=None):
    path = Path(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    frame.columns = [c.strip() for c in frame.columns]
    if columns is not None and tuple(frame.columns) != tuple(columns):
        raise DataValidationError(
            f"{path.name}: expected columns {', '.join(columns)}; found {', '.join(frame.columns)}"
        )
    return frame


def read_schedule(path, horizon: int | None = None) -> WaveSchedule:
    frame = _read_csv(path, SCHEDULE_COLUMNS)
    dates: dict[int, dict[int, dt.date]] = {}
    for k, row in enumerate(frame.itertuples(index=False), start=2):
        wave = _parse_int(row.wave, "wave", k)
        workshop = _parse_int(row.workshop, "workshop", k, 1, N_WORKSHOPS)
        if workshop in dates.setdefault(wave, {}):
            raise DataValidationError(f"line {k}: duplicate workshop {workshop} for wave {wave}")
        dates[wave][workshop] = _parse_date(row.date, k)
    return WaveSchedule({m: tuple(d[w] for w in sorted(d)) for m, d in dates.items()}, horizon)


def read_individuals(path, levels: Mapping[str, Sequence[str]] | None = None):
    frame = _read_csv(path)
    if tuple(frame.columns[:2]) != ("individual_id", "wave"):
        raise DataValidationError(f"{Path(path).name}: first columns must be individual_id, wave")
    levels = {k: set(v) for k, v in (levels or {}).items()}
    unknown = {}
    waves = [_parse_int(w, "wave", k) for k, w in enumerate(frame["wave"], start=2)]
    ids = frame["individual_id"].str.strip()
    if ids.duplicated().any():
        dup = ids[ids.duplicated()].iloc[0]
        raise DataValidationError(f"individual {dup!r} listed more than once")
    if (ids == "").any():
        raise DataValidationError(f"line {int(np.argmax(ids == '')) + 2}: empty individual_id")
    out = pd.DataFrame({"wave": waves}, index=pd.Index(ids, name="individual_id"))
    for col in frame.columns[2:]:
        values = frame[col].str.strip().replace("", MISSING)
        if col in levels:
            bad = ~values.isin(levels[col] | {MISSING})
            if bad.any():
                unknown[col] = int(bad.sum())
                values = values.where(~bad, MISSING)
        out[col] = values.to_numpy()
    if unknown:
        logger.warning("unknown covariate levels mapped to %r: %s", MISSING, unknown)
    return out, unknown


def read_ratings(path, individuals: pd.DataFrame, schedule: WaveSchedule) -> pd.DataFrame:
    frame = _read_csv(path, RATINGS_COLUMNS)
    rows = []
    seen = set()
    for k, row in enumerate(frame.itertuples(index=False), start=2):
        iid = row.individual_id.strip()
        wave = _parse_int(row.wave, "wave", k)
        t = _parse_int(row.time_index, "time_index", k, 1, N_TIMES)
        stakeholder = row.stakeholder.strip()
        if stakeholder not in STAKEHOLDERS:
            raise DataValidationError(f"line {k}: unknown stakeholder {stakeholder!r}")
        rating = _parse_int(row.rating, "rating", k, 0, 10)
        date = _parse_date(row.date, k)
        if wave not in schedule.dates:
            raise DataValidationError(f"line {k}: wave {wave} has no schedule")
        if iid not in individuals.index:
            raise DataValidationError(f"line {k}: individual {iid!r} not in individuals file")
        if individuals.at[iid, "wave"] != wave:
            raise DataValidationError(f"line {k}: individual {iid!r} belongs to wave {individuals.at[iid, 'wave']}")
        key = (iid, stakeholder, t)
        if key in seen:
            raise DataValidationError(f"line {k}: duplicate rating for {iid!r}, {stakeholder}, t={t}")
        seen.add(key)
        rows.append((iid, wave, t, stakeholder, rating, date))
    return pd.DataFrame(rows, columns=list(RATINGS_COLUMNS))


def incomplete_individuals(ratings: pd.DataFrame) -> tuple[str, ...]:
    """Individuals who attended a workshop without both its measurements."""
    flagged = []
    for iid, times in ratings.groupby("individual_id", sort=True)["time_index"]:
        present = set(times)
        for w in range(1, N_WORKSHOPS + 1):
            begin, end = 2 * w - 1 in present, 2 * w in present
            if begin != end:
                flagged.append(iid)
                break
    return tuple(flagged)


def make_dataset(individuals: pd.DataFrame, ratings: pd.DataFrame, schedule: WaveSchedule,
                 unknown_levels=None) -> Dataset:
    """Assemble a :class:`Dataset` from in-memory frames, sorting rows."""
    individuals = individuals.sort_index()
    ratings = ratings.sort_values(["individual_id", "time_index", "stakeholder"],
                                  key=lambda s: s.map(STAKEHOLDERS.index) if s.name == "stakeholder" else s)
    ratings = ratings.reset_index(drop=True)
    missing_waves = set(individuals["wave"]) - set(schedule.dates)
    if missing_waves:
        raise DataValidationError(f"waves without schedule: {sorted(missing_waves)}")
    return Dataset(individuals, ratings, schedule, incomplete_individuals(ratings), dict(unknown_levels or {}))


def load_dataset(ratings_csv, individuals_csv, schedule_csv, *, levels=None, horizon=None) -> Dataset:
    """Read and validate the three input files.

    Parameters
    ----------
    levels : mapping, optional
        Admissible levels per covariate. Values outside them become
        ``missing`` and are counted in ``Dataset.unknown_levels``.
    horizon : int, optional
        Overrides the default horizon (longest workshop gap).
    """
    for p in (ratings_csv, individuals_csv, schedule_csv):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    schedule = read_schedule(schedule_csv, horizon)
    individuals, unknown = read_individuals(individuals_csv, levels)
    ratings = read_ratings(ratings_csv, individuals, schedule)
    data = make_dataset(individuals, ratings, schedule, unknown)
    if data.incomplete:
        logger.info("%d individuals flagged incomplete", len(data.incomplete))
    return data


def write_dataset(dataset: Dataset, out_dir) -> dict[str, Path]:
    """Write the three CSV files; output is byte-stable for a given dataset."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / f"{name}.csv" for name in ("ratings", "individuals", "schedule")}

    ratings = dataset.ratings.copy()
    ratings["date"] = [d.isoformat() for d in ratings["date"]]
    ratings.to_csv(paths["ratings"], index=False, lineterminator="\n")

    individuals = dataset.individuals.reset_index().replace(MISSING, "")
    individuals.to_csv(paths["individuals"], index=False, lineterminator="\n")

    sched = [(m, w + 1, d.isoformat()) for m, days in dataset.schedule.dates.items() for w, d in enumerate(days)]
    pd.DataFrame(sched, columns=list(SCHEDULE_COLUMNS)).to_csv(paths["schedule"], index=False, lineterminator="\n")
    return paths
