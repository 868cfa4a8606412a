"""Basic (reflected-percentile) bootstrap interval for log2 RR.

Each replicate resamples ensemble members and years of both model scenarios, refits
them, and recomputes log2 RR for the fixed event probability p_O. Replicates with
infinite RR (z_A above the counterfactual upper bound) are counted and left out of the
percentiles.
"""

import math

import numpy as np

from extreme_attribution.analysis.attribution import AttributionResult, log2_risk_ratio
from extreme_attribution.data.series import ScenarioSeries
from extreme_attribution.errors import AttributionError, MethodInapplicableError
from extreme_attribution.evd.core import log_exceedance_at, return_level_at
from extreme_attribution.evd.fitting import CovariateMode, FitConfig, fit_matrix
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import (
    BootstrapConfig,
    IntervalMethod,
    IntervalResult,
)
from extreme_attribution.uncertainty.messages import ReplicateOutcome, ReplicateTask
from extreme_attribution.worker_pool import BaseWorker, WorkerPool

logger = logging.getLogger(__name__)

ACTUAL_STREAM = 0
COUNTERFACTUAL_STREAM = 1


def resample_series(
    series: ScenarioSeries, rng: np.random.Generator, config: BootstrapConfig
) -> tuple[np.ndarray, np.ndarray | None]:
    """Members x years values (and matching covariates) drawn with replacement."""
    members, n_years = series.values.shape
    rows = rng.integers(0, members, members) if config.resample_members else np.arange(members)
    if not config.resample_years:
        columns = np.broadcast_to(np.arange(n_years), (members, n_years))
    elif config.per_member_years:
        columns = rng.integers(0, n_years, (members, n_years))
    else:
        columns = np.broadcast_to(rng.integers(0, n_years, n_years), (members, n_years))
    values = series.values[rows[:, None], columns]
    covariates = series.covariate[columns] if series.covariate is not None else None
    return values, covariates


class BootstrapWorker(BaseWorker[ReplicateTask, ReplicateOutcome]):
    def __init__(
        self,
        actual: ScenarioSeries,
        counterfactual: ScenarioSeries,
        p_o: float,
        x_event: tuple[float, ...],
        actual_mode: CovariateMode,
        config: BootstrapConfig,
        fit_config: FitConfig,
    ):
        super().__init__()
        self.actual = actual
        self.counterfactual = counterfactual
        self.p_o = p_o
        self.x_event = x_event
        self.actual_mode = actual_mode
        self.config = config
        self.fit_config = fit_config

    def process_message(self, message: ReplicateTask) -> ReplicateOutcome:
        b = message.index
        rng_a = np.random.default_rng([self.config.seed, b, ACTUAL_STREAM])
        rng_c = np.random.default_rng([self.config.seed, b, COUNTERFACTUAL_STREAM])
        tol = self.fit_config.gumbel_tolerance
        try:
            values, covariates = resample_series(self.actual, rng_a, self.config)
            actual_fit = fit_matrix(values, covariates, self.fit_config, self.actual_mode)
            values, _ = resample_series(self.counterfactual, rng_c, self.config)
            cf_fit = fit_matrix(values, None, self.fit_config, CovariateMode.STATIONARY)
        except AttributionError as e:
            return ReplicateOutcome(index=b, failure=str(e))
        if not (actual_fit.converged and cf_fit.converged):
            return ReplicateOutcome(index=b, failure="replicate fit did not converge")

        params = actual_fit.params
        z_a = float(
            return_level_at(self.p_o, params.location(self.x_event), params.sigma, params.xi, tol)
        )
        cf = cf_fit.params
        log_p_c = log_exceedance_at(z_a, cf.beta[0], cf.sigma, cf.xi, tol)
        return ReplicateOutcome(
            index=b,
            log2_rr=log2_risk_ratio(self.p_o, log_p_c),
            z_a=z_a,
            p_c=math.exp(log_p_c),
        )


def bootstrap_interval(
    attr: AttributionResult,
    actual: ScenarioSeries,
    counterfactual: ScenarioSeries,
    config: BootstrapConfig | None = None,
    fit_config: FitConfig | None = None,
    *,
    threads: int = 1,
) -> IntervalResult:
    config = config or BootstrapConfig()
    fit_config = fit_config or FitConfig()
    if attr.lrt_only:
        raise MethodInapplicableError(
            "RR is infinite (p_C = 0); the basic bootstrap interval does not apply",
            stage="bootstrap",
        )
    worker = BootstrapWorker(
        actual,
        counterfactual,
        attr.p_o,
        attr.covariate_at_event,
        attr.actual_fit.mode,
        config,
        fit_config,
    )
    logger.info("Running %d bootstrap replicates on %d process(es)", config.replicates, threads)
    outcomes = WorkerPool(worker, threads).map(
        [ReplicateTask(index=b) for b in range(config.replicates)]
    )

    failed = [o for o in outcomes if o.failed]
    if len(failed) > config.max_failure_fraction * config.replicates:
        raise MethodInapplicableError(
            f"{len(failed)} of {config.replicates} bootstrap refits failed "
            f"(first: {failed[0].failure})",
            stage="bootstrap",
        )
    n_infinite = sum(o.infinite for o in outcomes)
    finite = np.array(
        [o.log2_rr for o in outcomes if not o.failed and math.isfinite(o.log2_rr)]
    )
    if finite.size < 2:
        raise MethodInapplicableError(
            f"only {finite.size} of {config.replicates} replicates have a finite RR",
            stage="bootstrap",
        )

    alpha = 1.0 - config.level
    q_low, q_high = np.quantile(finite, [alpha / 2.0, 1.0 - alpha / 2.0])
    estimate = attr.log2_rr
    unreliable = n_infinite > config.unreliable_fraction * config.replicates
    summary = f"{n_infinite} of {config.replicates} replicates excluded (infinite RR)"
    if unreliable:
        logger.warning("Bootstrap interval unreliable: %s", summary)
    if failed:
        logger.warning("%d bootstrap replicates failed to fit and were dropped", len(failed))

    return IntervalResult(
        method=IntervalMethod.BOOTSTRAP,
        level=config.level,
        lower=2.0 * estimate - float(q_high),
        upper=2.0 * estimate - float(q_low),
        estimate=estimate,
        diagnostics={
            "replicates": config.replicates,
            "finite": int(finite.size),
            "infinite": int(n_infinite),
            "failed": len(failed),
            "unreliable": bool(unreliable),
            "summary": summary,
            "quantiles": [float(q_low), float(q_high)],
            "standard_error": float(np.std(finite, ddof=1)),
            "values": [o.log2_rr for o in outcomes],
        },
    )
