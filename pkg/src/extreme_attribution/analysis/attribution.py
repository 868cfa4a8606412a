"""Quantile bias correction and the risk ratio.

The event is defined by its probability in the observed climate. That probability is
carried to the actual model world as a return level, and the counterfactual model is
asked how likely that level is without anthropogenic forcing:

    p_O  ->  z_A = RL_A(p_O; x_event)  ->  p_C = P_C(Z > z_A)  ->  RR = p_O / p_C
"""

import math
from dataclasses import dataclass

from extreme_attribution.data.series import ScenarioSeries
from extreme_attribution.errors import AttributionError, FitFailureError, InvalidInputError
from extreme_attribution.evd.core import (
    gev_exceedance_prob,
    gev_log_exceedance_prob,
    gev_return_level,
)
from extreme_attribution.evd.fitting import CovariateMode, FitConfig, FitResult, fit_pp
from extreme_attribution.logger import logging

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class EventDefinition:
    """Exactly one of ``magnitude`` (observed units) or ``probability`` (p_O)."""

    magnitude: float | None = None
    probability: float | None = None
    event_year: int | None = None

    def __post_init__(self):
        if (self.magnitude is None) == (self.probability is None):
            raise InvalidInputError("an event needs exactly one of magnitude or probability")
        if self.magnitude is not None and not math.isfinite(self.magnitude):
            raise InvalidInputError(f"event magnitude must be finite, got {self.magnitude}")
        if self.probability is not None and not 0.0 < self.probability < 1.0:
            raise InvalidInputError(f"event probability must lie in (0, 1), got {self.probability}")


@dataclass(frozen=True)
class UnadjustedComparison:
    """Raw magnitude evaluated directly in both model fits, without bias correction."""

    p_a: float
    p_c: float
    rr: float
    log2_rr: float


@dataclass(frozen=True, eq=False)
class AttributionResult:
    event: EventDefinition
    p_o: float
    z_a: float
    p_c: float
    log_p_c: float
    log2_rr: float
    actual_fit: FitResult
    counterfactual_fit: FitResult
    covariate_at_event: tuple[float, ...]
    observation_fit: FitResult | None = None
    unadjusted: UnadjustedComparison | None = None

    @property
    def rr(self) -> float:
        return 2.0**self.log2_rr if self.log2_rr < 1024 else math.inf

    @property
    def far(self) -> float:
        """Fraction of attributable risk, 1 - 1/RR."""
        return 1.0 - 1.0 / self.rr if self.rr > 0 else -math.inf

    @property
    def lrt_only(self) -> bool:
        # p_C == 0: only the likelihood-ratio bound can quantify uncertainty
        return math.isinf(self.log2_rr)


def log2_risk_ratio(p_a: float, log_p_c: float) -> float:
    if log_p_c == -math.inf:
        return math.inf
    return (math.log(p_a) - log_p_c) / LOG2


def _require_converged(fit: FitResult, what: str) -> None:
    if not fit.converged:
        raise FitFailureError(f"{what} fit did not converge", stage=what)


def estimate_p_o(obs_fit: FitResult, event: EventDefinition) -> float:
    """Observed exceedance probability of the event magnitude in the event year.

    Zero at or above a finite upper support bound. Whether the mapping can go on
    from there is for ``map_to_model`` to decide.
    """
    if event.magnitude is None:
        raise InvalidInputError("the event is defined by probability; nothing to estimate")
    _require_converged(obs_fit, "observation")
    x = obs_fit.covariate_at(event.event_year)
    return gev_exceedance_prob(event.magnitude, obs_fit.params, x)


def map_to_model(actual_fit: FitResult, p_o: float, event_year: int | None) -> float:
    """Return level z_A of probability ``p_o`` in the actual fit at the event year."""
    if not 0.0 < p_o < 1.0:
        raise InvalidInputError(f"p_O must lie in (0, 1), got {p_o}")
    _require_converged(actual_fit, "actual")
    return gev_return_level(p_o, actual_fit.params, actual_fit.covariate_at(event_year))


def estimate_log_p_c(cf_fit: FitResult, z_a: float) -> float:
    if not cf_fit.params.is_stationary:
        raise InvalidInputError("the counterfactual fit must be stationary")
    _require_converged(cf_fit, "counterfactual")
    return gev_log_exceedance_prob(z_a, cf_fit.params)


def estimate_p_c(cf_fit: FitResult, z_a: float) -> float:
    """Exceedance probability of ``z_a`` in the stationary counterfactual fit."""
    return math.exp(estimate_log_p_c(cf_fit, z_a))


def unadjusted_comparison(
    actual_fit: FitResult, cf_fit: FitResult, magnitude: float, x_event: tuple[float, ...]
) -> UnadjustedComparison:
    p_a = gev_exceedance_prob(magnitude, actual_fit.params, x_event)
    log_p_c = gev_log_exceedance_prob(magnitude, cf_fit.params)
    p_c = math.exp(log_p_c)
    if p_a == 0.0:
        return UnadjustedComparison(p_a, p_c, 0.0 if p_c > 0 else math.nan, -math.inf)
    log2_rr = log2_risk_ratio(p_a, log_p_c)
    rr = 2.0**log2_rr if log2_rr < 1024 else math.inf
    return UnadjustedComparison(p_a, p_c, rr, log2_rr)


def attribute_fits(
    actual_fit: FitResult,
    cf_fit: FitResult,
    event: EventDefinition,
    *,
    p_o: float | None = None,
    observation_fit: FitResult | None = None,
) -> AttributionResult:
    """Bias-corrected risk ratio from fits already in hand."""
    if p_o is None:
        if event.probability is not None:
            p_o = event.probability
        elif observation_fit is None:
            raise InvalidInputError("an event given by magnitude needs an observation fit")
        else:
            p_o = estimate_p_o(observation_fit, event)
    x_event = actual_fit.covariate_at(event.event_year)
    z_a = map_to_model(actual_fit, p_o, event.event_year)
    log_p_c = estimate_log_p_c(cf_fit, z_a)
    log2_rr = log2_risk_ratio(p_o, log_p_c)
    unadjusted = None
    if event.magnitude is not None:
        unadjusted = unadjusted_comparison(actual_fit, cf_fit, event.magnitude, x_event)
    result = AttributionResult(
        event=event,
        p_o=p_o,
        z_a=z_a,
        p_c=math.exp(log_p_c),
        log_p_c=log_p_c,
        log2_rr=log2_rr,
        actual_fit=actual_fit,
        counterfactual_fit=cf_fit,
        covariate_at_event=x_event,
        observation_fit=observation_fit,
        unadjusted=unadjusted,
    )
    logger.info(
        "Attribution: p_O %.4g, z_A %.4g, p_C %.4g, log2 RR %.4g",
        p_o,
        z_a,
        result.p_c,
        log2_rr,
    )
    if result.lrt_only:
        logger.warning(
            "z_A %.4g lies above the counterfactual upper bound; RR is infinite and only "
            "the likelihood-ratio bound applies",
            z_a,
        )
    return result


def _fit_stage(series: ScenarioSeries, config: FitConfig) -> FitResult:
    try:
        fit = fit_pp(series, config)
    except AttributionError as e:
        e.with_stage(str(series.scenario))
        raise
    _require_converged(fit, str(series.scenario))
    return fit


def run_attribution(
    observation: ScenarioSeries | None,
    actual: ScenarioSeries,
    counterfactual: ScenarioSeries,
    event: EventDefinition,
    config: FitConfig | None = None,
    *,
    observation_mode: CovariateMode | None = None,
    actual_mode: CovariateMode | None = None,
) -> AttributionResult:
    """Fit all scenarios and compute the bias-corrected risk ratio.

    The counterfactual is always fitted stationary. When the event is given as a
    probability the observation series is not fitted.
    """
    config = config or FitConfig()
    observation_fit = None
    if event.magnitude is not None:
        if observation is None:
            raise InvalidInputError("an event given by magnitude needs an observation series")
        observation_fit = _fit_stage(
            observation, config.with_mode(observation_mode or config.covariate_mode)
        )
    actual_fit = _fit_stage(actual, config.with_mode(actual_mode or config.covariate_mode))
    cf_fit = _fit_stage(counterfactual, config.with_mode(CovariateMode.STATIONARY))
    try:
        return attribute_fits(actual_fit, cf_fit, event, observation_fit=observation_fit)
    except AttributionError as e:
        e.with_stage("attribution")
        raise

