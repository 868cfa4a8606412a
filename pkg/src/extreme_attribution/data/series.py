"""Scenario series: annual values for one or more ensemble members, plus a covariate.

CSV layout is one row per (year, member) with columns ``year``, ``value`` and optional
``member`` and ``covariate``. The covariate must be identical across members of a year.
"""

import dataclasses
import math
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd

from extreme_attribution.errors import (
    InvalidInputError,
    SeriesParseError,
    SeriesValidationError,
)
from extreme_attribution.logger import logging

logger = logging.getLogger(__name__)

YEAR = "year"
MEMBER = "member"
VALUE = "value"
COVARIATE = "covariate"
COLUMNS = (YEAR, MEMBER, VALUE, COVARIATE)


class Scenario(StrEnum):
    OBSERVATION = "observation"
    ACTUAL = "actual"
    COUNTERFACTUAL = "counterfactual"


@dataclass(frozen=True, eq=False)
class ScenarioSeries:
    """``values`` is members x years; ``covariate`` has one entry per year."""

    scenario: Scenario
    years: np.ndarray
    values: np.ndarray
    covariate: np.ndarray | None = None

    def __post_init__(self):
        scenario = Scenario(self.scenario)
        years = np.asarray(self.years)
        if years.ndim != 1 or years.size == 0:
            raise SeriesValidationError("a series needs a non-empty 1-D year index")
        if not np.all(np.equal(np.mod(years, 1), 0)):
            raise SeriesValidationError("years must be integers")
        years = years.astype(int)
        if np.any(np.diff(years) <= 0):
            raise SeriesValidationError("years must be strictly increasing")
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.ndim != 2 or values.shape[1] != years.size or values.shape[0] < 1:
            raise SeriesValidationError(
                f"values must be members x {years.size} years, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise SeriesValidationError("values contain missing or non-finite entries")
        if scenario is Scenario.OBSERVATION and values.shape[0] != 1:
            raise SeriesValidationError("an observation series has exactly one member")
        covariate = self.covariate
        if covariate is not None:
            covariate = np.asarray(covariate, dtype=float).reshape(-1)
            if covariate.size != years.size:
                raise SeriesValidationError(
                    f"covariate has {covariate.size} entries for {years.size} years"
                )
            if not np.all(np.isfinite(covariate)):
                raise SeriesValidationError("covariate contains non-finite entries")
            covariate = _read_only(covariate)
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "years", _read_only(years))
        object.__setattr__(self, "values", _read_only(values))
        object.__setattr__(self, "covariate", covariate)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioSeries):
            return NotImplemented
        if (self.covariate is None) != (other.covariate is None):
            return False
        return (
            self.scenario is other.scenario
            and np.array_equal(self.years, other.years)
            and np.array_equal(self.values, other.values)
            and (self.covariate is None or np.array_equal(self.covariate, other.covariate))
        )

    __hash__ = None

    @property
    def members(self) -> int:
        return self.values.shape[0]

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def pooled_values(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray) -> "ScenarioSeries":
        return dataclasses.replace(self, values=values)

    def with_covariate(self, covariate: np.ndarray | None) -> "ScenarioSeries":
        return dataclasses.replace(self, covariate=covariate)


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def _numeric_column(frame: pd.DataFrame, column: str, path: Path) -> pd.Series:
    # float() rounds correctly, so written series read back unchanged
    converted = frame[column].str.strip().map(_to_float).astype(float)
    bad = ~np.isfinite(converted.to_numpy())
    if bad.any():
        index = int(np.argmax(bad))
        raw = frame[column].iloc[index]
        # header is line 1
        raise SeriesParseError(f"column '{column}' has non-numeric value {raw!r}", line=index + 2, path=str(path))
    return converted


def _integer_column(frame: pd.DataFrame, column: str, path: Path) -> pd.Series:
    converted = _numeric_column(frame, column, path)
    fractional = converted != np.round(converted)
    if fractional.any():
        index = int(np.argmax(fractional.to_numpy()))
        raise SeriesParseError(f"column '{column}' must hold integers", line=index + 2, path=str(path))
    return converted.astype(int)


def load_series(path: Path, scenario: Scenario = Scenario.ACTUAL) -> ScenarioSeries:
    """Read a scenario series CSV; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"series file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SeriesParseError(f"cannot parse CSV: {e}", path=str(path)) from e

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    unknown = [c for c in frame.columns if c not in COLUMNS]
    if unknown:
        raise SeriesParseError(f"unknown columns {unknown}", line=1, path=str(path))
    for required in (YEAR, VALUE):
        if required not in frame.columns:
            raise SeriesParseError(f"missing required column '{required}'", line=1, path=str(path))
    if frame.empty:
        raise SeriesValidationError(f"{path} contains no rows")

    parsed = pd.DataFrame(
        {
            YEAR: _integer_column(frame, YEAR, path),
            MEMBER: _integer_column(frame, MEMBER, path) if MEMBER in frame.columns else 1,
            VALUE: _numeric_column(frame, VALUE, path),
        }
    )
    nonpositive = parsed[MEMBER] < 1
    if nonpositive.any():
        index = int(np.argmax(nonpositive.to_numpy()))
        raise SeriesParseError(
            f"member numbers start at 1, got {parsed[MEMBER].iloc[index]}",
            line=index + 2,
            path=str(path),
        )

    if COVARIATE in frame.columns:
        parsed[COVARIATE] = _numeric_column(frame, COVARIATE, path)

    duplicated = parsed.duplicated([YEAR, MEMBER])
    if duplicated.any():
        index = int(np.argmax(duplicated.to_numpy()))
        row = parsed.iloc[index]
        raise SeriesParseError(
            f"duplicate row for year {row[YEAR]} member {row[MEMBER]}",
            line=index + 2,
            path=str(path),
        )

    covariate = None
    if COVARIATE in parsed.columns:
        inconsistent = parsed.groupby(YEAR)[COVARIATE].transform("nunique") > 1
        if inconsistent.any():
            index = int(np.argmax(inconsistent.to_numpy()))
            raise SeriesParseError(
                f"covariate differs between members in year {parsed[YEAR].iloc[index]}",
                line=index + 2,
                path=str(path),
            )
        covariate = parsed.groupby(YEAR)[COVARIATE].first().sort_index().to_numpy()

    table = parsed.pivot(index=MEMBER, columns=YEAR, values=VALUE).sort_index().sort_index(axis=1)
    if table.isna().to_numpy().any():
        member, year = table.stack(future_stack=True).loc[lambda s: s.isna()].index[0]
        raise SeriesValidationError(f"{path}: no value for year {year} member {member}")

    series = ScenarioSeries(
        scenario=scenario,
        years=table.columns.to_numpy(),
        values=table.to_numpy(dtype=float),
        covariate=covariate,
    )
    logger.info(
        "Loaded %s series from %s: %d members x %d years",
        scenario,
        path,
        series.members,
        series.n_years,
    )
    return series


def series_frame(series: ScenarioSeries) -> pd.DataFrame:
    """Long-format frame with one row per (year, member)."""
    members, n_years = series.values.shape
    frame = pd.DataFrame(
        {
            YEAR: np.tile(series.years, members),
            MEMBER: np.repeat(np.arange(1, members + 1), n_years),
            VALUE: series.values.reshape(-1),
        }
    )
    if series.covariate is not None:
        frame[COVARIATE] = np.tile(series.covariate, members)
    return frame.sort_values([YEAR, MEMBER], kind="stable").reset_index(drop=True)


def write_series(series: ScenarioSeries, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series_frame(series).to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote %s series to %s", series.scenario, path)


def compute_anomalies(series: ScenarioSeries, ref_start: int, ref_end: int) -> ScenarioSeries:
    """Subtract the mean over the reference years (all members pooled)."""
    if ref_start > ref_end:
        raise InvalidInputError(f"reference window {ref_start}-{ref_end} is reversed")
    mask = (series.years >= ref_start) & (series.years <= ref_end)
    if not mask.any():
        raise InvalidInputError(
            f"reference window {ref_start}-{ref_end} contains no years of the {series.scenario} series"
        )
    baseline = float(np.mean(series.values[:, mask]))
    logger.info(
        "Anomalies for %s relative to %d-%d (baseline %.4g)",
        series.scenario,
        ref_start,
        ref_end,
        baseline,
    )
    return series.with_values(series.values - baseline)
