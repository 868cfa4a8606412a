"""Plot data for threshold choice and fitted distribution functions."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from extreme_attribution.data.series import ScenarioSeries
from extreme_attribution.evd.core import exceedance_at, gev_return_level, support_bounds
from extreme_attribution.evd.fitting import (
    FitConfig,
    FitResult,
    default_mrl_thresholds,
    fit_pp,
    mean_residual_life,
)
from extreme_attribution.reports import Table, mrl_table

# tail probabilities that bound the CDF grid where the support is unbounded
GRID_TAIL = 1e-4


@dataclass(frozen=True)
class SupportRow:
    series: str
    covariate: float
    lower: float
    upper: float


@dataclass(frozen=True)
class Diagnosis:
    mrl: Table
    cdf: Table
    support: SupportRow
    fit: FitResult


def _diagnosis_year(series: ScenarioSeries, event_year: int | None) -> int:
    if event_year is not None and event_year in series.years:
        return event_year
    return int(series.years[-1])


def cdf_curve(fit: FitResult, x: tuple[float, ...], n_points: int = 200) -> pd.DataFrame:
    """Fitted CDF on a grid that ends exactly at a finite upper bound."""
    params = fit.params
    support = support_bounds(params, x)
    lower = gev_return_level(1.0 - GRID_TAIL, params, x)
    if math.isfinite(support.lower):
        lower = max(lower, support.lower)
    upper = support.upper if math.isfinite(support.upper) else gev_return_level(GRID_TAIL, params, x)
    grid = np.linspace(lower, upper, n_points)
    cdf = 1.0 - exceedance_at(grid, params.location(x), params.sigma, params.xi)
    return pd.DataFrame(
        {"z": grid, "cdf": cdf, "at_upper_bound": grid == support.upper}
    )


def diagnose_series(
    series: ScenarioSeries,
    config: FitConfig,
    *,
    event_year: int | None = None,
    mrl_points: int = 50,
    cdf_points: int = 200,
) -> Diagnosis:
    name = series.scenario.value
    mrl = mean_residual_life(series, default_mrl_thresholds(series, mrl_points))
    fit = fit_pp(series, config)
    year = _diagnosis_year(series, event_year)
    x = fit.covariate_at(year)
    support = support_bounds(fit.params, x)
    return Diagnosis(
        mrl=mrl_table(f"mrl_{name}", mrl),
        cdf=Table(f"cdf_{name}", f"Fitted CDF ({name}, year {year})", cdf_curve(fit, x, cdf_points)),
        support=SupportRow(
            series=name,
            covariate=x[0] if x else math.nan,
            lower=support.lower,
            upper=support.upper,
        ),
        fit=fit,
    )


def supports_table(rows: Sequence[SupportRow]) -> Table:
    frame = pd.DataFrame(
        {
            "series": [r.series for r in rows],
            "covariate": [r.covariate for r in rows],
            "lower": [r.lower for r in rows],
            "upper": [r.upper for r in rows],
        }
    )
    return Table("supports", "Support bounds of the fitted distributions", frame)
