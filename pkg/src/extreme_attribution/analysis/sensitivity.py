"""Risk ratio and its likelihood-ratio lower bound across a grid of event probabilities."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

from extreme_attribution.data.series import ScenarioSeries
from extreme_attribution.errors import AttributionError, InvalidInputError
from extreme_attribution.evd.core import gev_return_level
from extreme_attribution.evd.fitting import CovariateMode, FitConfig, FitResult, fit_pp
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import LRTConfig, LRTMode
from extreme_attribution.uncertainty.lrt import LRTProblem, lrt_lower_bound
from extreme_attribution.uncertainty.messages import SweepTask
from extreme_attribution.worker_pool import BaseWorker, WorkerPool

logger = logging.getLogger(__name__)

DEFAULT_PROBABILITIES = (0.2, 0.1, 0.05, 0.032, 0.023, 0.01)


@dataclass(frozen=True)
class SensitivityRow:
    p_a: float
    z_a: float
    p_c: float
    log2_rr: float
    lower_log2: float
    z_o: float | None = None
    status: str = "ok"

    @property
    def rr_lower(self) -> float:
        return 2.0**self.lower_log2 if self.lower_log2 < 1024 else math.inf


class SweepWorker(BaseWorker[SweepTask, SensitivityRow]):
    def __init__(
        self,
        problem: LRTProblem,
        mode: LRTMode,
        lrt_config: LRTConfig,
        observation_fit: FitResult | None,
        event_year: int | None,
    ):
        super().__init__()
        self.problem = problem
        self.mode = mode
        self.lrt_config = lrt_config
        self.observation_fit = observation_fit
        self.event_year = event_year

    def process_message(self, message: SweepTask) -> SensitivityRow:
        problem = self.problem.at_probability(message.p_a)
        z_o = None
        if self.observation_fit is not None:
            x = self.observation_fit.covariate_at(self.event_year)
            z_o = gev_return_level(message.p_a, self.observation_fit.params, x)
        p_c = message.p_a / 2.0**problem.log2_rr if math.isfinite(problem.log2_rr) else 0.0
        try:
            bound = lrt_lower_bound(problem, self.mode, self.lrt_config).lower
            status = "ok"
        except AttributionError as e:
            logger.warning("No LRT bound at p_A=%.4g: %s", message.p_a, e)
            bound, status = math.nan, f"failed: {e}"
        return SensitivityRow(
            p_a=message.p_a,
            z_a=problem.z_a,
            p_c=p_c,
            log2_rr=problem.log2_rr,
            lower_log2=bound,
            z_o=z_o,
            status=status,
        )


def sensitivity_sweep(
    observation: ScenarioSeries | None,
    actual: ScenarioSeries,
    counterfactual: ScenarioSeries,
    p_values: Sequence[float] = DEFAULT_PROBABILITIES,
    config: FitConfig | None = None,
    *,
    event_year: int | None = None,
    lrt_config: LRTConfig | None = None,
    mode: LRTMode = LRTMode.JOINT,
    actual_mode: CovariateMode | None = None,
    threads: int = 1,
) -> list[SensitivityRow]:
    """One row per probability, sorted from the most to the least likely event.

    The fits are made once; only the event probability changes between rows.
    """
    config = config or FitConfig()
    lrt_config = lrt_config or LRTConfig()
    probabilities = sorted({float(p) for p in p_values}, reverse=True)
    if not probabilities:
        raise InvalidInputError("sensitivity sweep needs at least one probability")
    for p in probabilities:
        if not 0.0 < p < 1.0:
            raise InvalidInputError(f"probabilities must lie in (0, 1), got {p}")

    observation_fit = None
    if observation is not None:
        observation_fit = _fit(observation, config)
    actual_fit = _fit(actual, config.with_mode(actual_mode or config.covariate_mode))
    cf_fit = _fit(counterfactual, config.with_mode(CovariateMode.STATIONARY))
    problem = LRTProblem.from_fits(
        probabilities[0],
        actual_fit,
        cf_fit,
        event_year,
        tol=config.gumbel_tolerance,
        max_iterations=lrt_config.max_iterations,
    )
    worker = SweepWorker(problem, LRTMode(mode), lrt_config, observation_fit, event_year)
    rows = WorkerPool(worker, threads).map([SweepTask(p_a=p) for p in probabilities])
    logger.info("Sensitivity sweep over %d probabilities finished", len(rows))
    return rows


def _fit(series: ScenarioSeries, config: FitConfig) -> FitResult:
    try:
        return fit_pp(series, config)
    except AttributionError as e:
        e.with_stage(str(series.scenario))
        raise
