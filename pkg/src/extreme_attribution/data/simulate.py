"""Synthetic attribution studies drawn from known GEV models.

The actual-scenario truth may depend linearly on a covariate path; the counterfactual
truth is stationary. The true risk ratio is computed analytically from the truth, so
the estimators can be checked against it.
"""

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from extreme_attribution.data.series import Scenario, ScenarioSeries
from extreme_attribution.errors import ConfigError, InvalidInputError
from extreme_attribution.evd.core import (
    EVDParams,
    block_maximum_params,
    gev_log_exceedance_prob,
    gev_return_level,
    gev_sample,
)
from extreme_attribution.evd.fitting import BlockMode
from extreme_attribution.logger import logging

if TYPE_CHECKING:
    from extreme_attribution.config import SimulationManifest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StudyTruth:
    """Per-observation (member-year) GEV parameters of each scenario."""

    actual: EVDParams
    counterfactual: EVDParams
    observation: EVDParams | None = None

    def __post_init__(self):
        if not self.counterfactual.is_stationary:
            raise InvalidInputError("the counterfactual truth must be stationary")
        if self.observation is not None and (
            self.observation.n_covariates != self.actual.n_covariates
        ):
            raise InvalidInputError("observation and actual truths need the same covariates")

    @property
    def observation_params(self) -> EVDParams:
        return self.observation or self.actual


@dataclass(frozen=True)
class TrueRiskRatio:
    z_a: float
    p_c: float
    log_p_c: float
    rr: float
    log2_rr: float


@dataclass(frozen=True)
class SimulatedStudy:
    observation: ScenarioSeries
    actual: ScenarioSeries
    counterfactual: ScenarioSeries
    event_year: int
    p_a: float
    truth: StudyTruth
    true: TrueRiskRatio
    block_mode: BlockMode


def covariate_path(n_years: int, start: float = 0.0, end: float = 1.0, power: float = 1.0) -> np.ndarray:
    """Monotone path from ``start`` to ``end``; ``power > 1`` back-loads the change."""
    if n_years < 2:
        raise InvalidInputError("a covariate path needs at least two years")
    return start + (end - start) * np.linspace(0.0, 1.0, n_years) ** power


def analytic_risk_ratio(
    truth: StudyTruth,
    p_a: float,
    x_event: tuple[float, ...],
    members_actual: int,
    members_counterfactual: int,
    block_mode: BlockMode = BlockMode.ENSEMBLE,
) -> TrueRiskRatio:
    """Risk ratio implied by the truth, on the same block scale the fits use."""
    actual, counterfactual = truth.actual, truth.counterfactual
    if BlockMode(block_mode) is BlockMode.ENSEMBLE:
        actual = block_maximum_params(actual, members_actual)
        counterfactual = block_maximum_params(counterfactual, members_counterfactual)
    z_a = gev_return_level(p_a, actual, x_event)
    log_p_c = gev_log_exceedance_prob(z_a, counterfactual)
    if log_p_c == -math.inf:
        return TrueRiskRatio(z_a, 0.0, log_p_c, math.inf, math.inf)
    log_rr = math.log(p_a) - log_p_c
    return TrueRiskRatio(z_a, math.exp(log_p_c), log_p_c, math.exp(log_rr), log_rr / math.log(2.0))


def simulate_study(
    truth: StudyTruth,
    *,
    members_actual: int = 5,
    members_counterfactual: int = 12,
    n_years_actual: int = 112,
    n_years_counterfactual: int = 100,
    covariate: np.ndarray | None = None,
    start_year: int = 1901,
    seed: int = 0,
    p_a: float = 0.032,
    event_year: int | None = None,
    block_mode: BlockMode = BlockMode.ENSEMBLE,
) -> SimulatedStudy:
    if members_actual < 1 or members_counterfactual < 1:
        raise InvalidInputError("each ensemble needs at least one member")
    if covariate is None:
        covariate = covariate_path(n_years_actual)
    covariate = np.asarray(covariate, dtype=float)
    if covariate.shape != (n_years_actual,):
        raise InvalidInputError(f"covariate must have {n_years_actual} entries")

    years = np.arange(start_year, start_year + n_years_actual)
    if event_year is None:
        event_year = int(years[-1])
    if event_year not in years:
        raise InvalidInputError(f"event year {event_year} outside {years[0]}-{years[-1]}")

    obs_rng, actual_rng, cf_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )

    def draw(params: EVDParams, members: int, rng: np.random.Generator) -> np.ndarray:
        locations = params.locations(covariate.reshape(-1, 1)) if not params.is_stationary else None
        return gev_sample(params, (members, n_years_actual), rng, locations)

    observation = ScenarioSeries(
        Scenario.OBSERVATION, years, draw(truth.observation_params, 1, obs_rng), covariate
    )
    actual = ScenarioSeries(
        Scenario.ACTUAL, years, draw(truth.actual, members_actual, actual_rng), covariate
    )
    counterfactual = ScenarioSeries(
        Scenario.COUNTERFACTUAL,
        np.arange(start_year, start_year + n_years_counterfactual),
        gev_sample(truth.counterfactual, (members_counterfactual, n_years_counterfactual), cf_rng),
    )

    x_event = () if truth.actual.is_stationary else (float(covariate[years == event_year][0]),)
    true = analytic_risk_ratio(
        truth, p_a, x_event, members_actual, members_counterfactual, block_mode
    )
    logger.info(
        "Simulated study (seed %d): true z_A %.4g, p_C %.3g, log2 RR %.3g",
        seed,
        true.z_a,
        true.p_c,
        true.log2_rr,
    )
    return SimulatedStudy(
        observation=observation,
        actual=actual,
        counterfactual=counterfactual,
        event_year=int(event_year),
        p_a=p_a,
        truth=truth,
        true=true,
        block_mode=BlockMode(block_mode),
    )


def study_from_manifest(manifest: "SimulationManifest", seed: int | None = None) -> SimulatedStudy:
    truth = manifest.truth
    try:
        study_truth = StudyTruth(
            actual=truth.actual.to_params(),
            counterfactual=truth.counterfactual.to_params(),
            observation=truth.observation.to_params() if truth.observation else None,
        )
    except InvalidInputError as e:
        raise ConfigError(f"invalid simulation truth: {e}") from e
    path = manifest.covariate
    return simulate_study(
        study_truth,
        members_actual=manifest.members_actual,
        members_counterfactual=manifest.members_counterfactual,
        n_years_actual=manifest.years_actual,
        n_years_counterfactual=manifest.years_counterfactual,
        covariate=covariate_path(manifest.years_actual, path.start, path.end, path.power),
        start_year=manifest.start_year,
        seed=manifest.seed if seed is None else seed,
        p_a=manifest.event_probability,
        event_year=manifest.event_year,
        block_mode=manifest.block_mode,
    )


def study_summary(study: SimulatedStudy, seed: int) -> dict:
    """Sidecar record of the truth behind a simulated study."""

    def params(p: EVDParams) -> dict:
        return {"beta": list(p.beta), "sigma": p.sigma, "xi": p.xi}

    return {
        "seed": seed,
        "block_mode": study.block_mode.value,
        "event_year": study.event_year,
        "p_a": study.p_a,
        "members": {
            "actual": study.actual.members,
            "counterfactual": study.counterfactual.members,
        },
        "truth": {
            "observation": params(study.truth.observation_params),
            "actual": params(study.truth.actual),
            "counterfactual": params(study.truth.counterfactual),
        },
        "true": {
            "z_a": study.true.z_a,
            "p_c": study.true.p_c,
            "log_p_c": study.true.log_p_c,
            "rr": study.true.rr,
            "log2_rr": study.true.log2_rr,
        },
    }
