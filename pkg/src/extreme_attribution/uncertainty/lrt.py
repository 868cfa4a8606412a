"""Likelihood-ratio lower bound for log2 RR.

For a hypothesised risk ratio ``r0`` the counterfactual location is tied to the other
parameters so that the counterfactual exceedance probability of ``z_A`` is exactly
``p_A / r0``::

    mu_C = z_A(theta_A) - RL(p_A / r0; mu=0, sigma_C, xi_C)

Maximising the likelihood under that constraint and comparing with the unconstrained
maximum gives a statistic that is approximately chi-squared with one degree of freedom.
The lower bound is the smallest ``log2 r0`` the test does not reject. In ``pc_only``
mode only ``(sigma_C, xi_C)`` are free; in ``joint`` mode the actual parameters are
re-estimated as well.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from extreme_attribution.analysis.attribution import AttributionResult, log2_risk_ratio
from extreme_attribution.errors import (
    BracketTooSmallError,
    ConstrainedFitError,
    InvalidInputError,
    LRTConsistencyError,
)
from extreme_attribution.evd.core import (
    GUMBEL_TOLERANCE,
    log_exceedance_at,
    pp_log_likelihood_raw,
    return_level_at,
)
from extreme_attribution.evd.fitting import FitResult
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import IntervalResult, LRTConfig, LRTMode
from extreme_attribution.uncertainty.search import bisect_sign_change, bounded_minimum

logger = logging.getLogger(__name__)

SIMPLEX_LOG_SCALE_STEP = 0.1
SIMPLEX_SHAPE_STEP = 0.05


def _scenario_loglik(fit: FitResult, beta: np.ndarray, sigma: float, xi: float, tol: float) -> float:
    return pp_log_likelihood_raw(fit.exceedances, beta, sigma, xi, fit.observation_covariates, tol)


def _minimize(negloglik, theta0: np.ndarray, steps: np.ndarray, max_iterations: int):
    simplex = np.vstack([theta0, theta0 + np.diag(steps)])
    with np.errstate(all="ignore"):
        result = optimize.minimize(
            negloglik,
            theta0,
            method="Nelder-Mead",
            options={
                "maxiter": max_iterations,
                "maxfev": 2 * max_iterations,
                "xatol": 1e-9,
                "fatol": 1e-11,
                "initial_simplex": simplex,
                "adaptive": theta0.size > 3,
            },
        )
        if math.isfinite(result.fun):
            polish = optimize.minimize(negloglik, result.x, method="BFGS", options={"gtol": 1e-7})
            if math.isfinite(polish.fun) and polish.fun < result.fun:
                return polish.x, float(polish.fun)
    return result.x, float(result.fun)


def _location_steps(fit: FitResult) -> np.ndarray:
    """Simplex steps for the location coefficients of ``fit``."""
    steps = [0.1 * fit.params.sigma]
    if fit.observation_covariates is not None:
        for column in fit.observation_covariates.T:
            spread = float(np.std(column))
            steps.append(0.1 * fit.params.sigma / (spread if spread > 0 else 1.0))
    return np.array(steps)


def _refined_loglik(fit: FitResult, tol: float, max_iterations: int) -> float:
    """Unconstrained maximum, re-polished from the fitted estimate."""
    k = fit.params.n_covariates

    def negloglik(theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)) or theta[k + 1] > 700:
            return math.inf
        ll = _scenario_loglik(fit, theta[: k + 1], math.exp(theta[k + 1]), theta[k + 2], tol)
        return -ll if math.isfinite(ll) else math.inf

    theta0 = np.array([*fit.params.beta, math.log(fit.params.sigma), fit.params.xi])
    steps = np.concatenate([_location_steps(fit), [SIMPLEX_LOG_SCALE_STEP, SIMPLEX_SHAPE_STEP]])
    _, value = _minimize(negloglik, theta0, steps, max_iterations)
    return max(fit.loglik, -value)


@dataclass(frozen=True)
class ConstrainedFit:
    loglik: float
    theta: np.ndarray
    start: str


@dataclass(frozen=True, eq=False)
class LRTProblem:
    p_a: float
    actual: FitResult
    counterfactual: FitResult
    x_event: tuple[float, ...]
    z_a: float
    log2_rr: float
    actual_loglik: float
    counterfactual_loglik: float
    tol: float = GUMBEL_TOLERANCE
    max_iterations: int = 6000
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_fits(
        cls,
        p_a: float,
        actual_fit: FitResult,
        cf_fit: FitResult,
        event_year: int | None,
        *,
        tol: float = GUMBEL_TOLERANCE,
        max_iterations: int = 6000,
    ) -> "LRTProblem":
        if not 0.0 < p_a < 1.0:
            raise InvalidInputError(f"p_A must lie in (0, 1), got {p_a}")
        if actual_fit.exceedances is None or cf_fit.exceedances is None:
            raise InvalidInputError("likelihood-ratio bounds need fits that carry their data")
        if not cf_fit.params.is_stationary:
            raise InvalidInputError("the counterfactual fit must be stationary")
        x_event = actual_fit.covariate_at(event_year)
        params = actual_fit.params
        z_a = float(return_level_at(p_a, params.location(x_event), params.sigma, params.xi, tol))
        cf = cf_fit.params
        log2_rr = log2_risk_ratio(p_a, log_exceedance_at(z_a, cf.beta[0], cf.sigma, cf.xi, tol))
        return cls(
            p_a=p_a,
            actual=actual_fit,
            counterfactual=cf_fit,
            x_event=x_event,
            z_a=z_a,
            log2_rr=log2_rr,
            actual_loglik=_refined_loglik(actual_fit, tol, max_iterations),
            counterfactual_loglik=_refined_loglik(cf_fit, tol, max_iterations),
            tol=tol,
            max_iterations=max_iterations,
        )

    @classmethod
    def from_attribution(cls, attr: AttributionResult, **kwargs) -> "LRTProblem":
        return cls.from_fits(
            attr.p_o, attr.actual_fit, attr.counterfactual_fit, attr.event.event_year, **kwargs
        )

    def at_probability(self, p_a: float) -> "LRTProblem":
        """The same fits asked about a different event probability."""
        if not 0.0 < p_a < 1.0:
            raise InvalidInputError(f"p_A must lie in (0, 1), got {p_a}")
        params, cf = self.actual.params, self.counterfactual.params
        z_a = float(return_level_at(p_a, params.location(self.x_event), params.sigma, params.xi, self.tol))
        log_p_c = log_exceedance_at(z_a, cf.beta[0], cf.sigma, cf.xi, self.tol)
        return dataclasses.replace(
            self, p_a=p_a, z_a=z_a, log2_rr=log2_risk_ratio(p_a, log_p_c), _cache={}
        )

    def unconstrained_loglik(self, mode: LRTMode) -> float:
        if mode is LRTMode.PC_ONLY:
            return self.counterfactual_loglik
        return self.actual_loglik + self.counterfactual_loglik

    def _z_a(self, beta: np.ndarray, sigma_a: float, xi_a: float) -> float:
        mu_event = beta[0] + float(np.dot(beta[1:], self.x_event))
        return float(return_level_at(self.p_a, mu_event, sigma_a, xi_a, self.tol))

    def constrained_fit(self, r0: float, mode: LRTMode) -> ConstrainedFit:
        """Maximum log-likelihood subject to the counterfactual probability ``p_A / r0``."""
        p_c0 = self.p_a / r0
        if not 0.0 < p_c0 < 1.0:
            raise InvalidInputError(f"r0={r0:.6g} implies p_C={p_c0:.6g} outside (0, 1)")
        k = self.actual.params.n_covariates
        tol = self.tol
        cf = self.counterfactual

        def cf_loglik(z_a: float, sigma_c: float, xi_c: float) -> float:
            mu_c = z_a - float(return_level_at(p_c0, 0.0, sigma_c, xi_c, tol))
            if not math.isfinite(mu_c):
                return -math.inf
            return _scenario_loglik(cf, np.array([mu_c]), sigma_c, xi_c, tol)

        if mode is LRTMode.PC_ONLY:

            def negloglik(theta: np.ndarray) -> float:
                if not np.all(np.isfinite(theta)) or theta[0] > 700:
                    return math.inf
                ll = cf_loglik(self.z_a, math.exp(theta[0]), theta[1])
                return -ll if math.isfinite(ll) else math.inf

            warm = np.array([math.log(cf.params.sigma), cf.params.xi])
            steps = np.array([SIMPLEX_LOG_SCALE_STEP, SIMPLEX_SHAPE_STEP])
        else:

            def negloglik(theta: np.ndarray) -> float:
                if not np.all(np.isfinite(theta)) or max(theta[k + 1], theta[k + 3]) > 700:
                    return math.inf
                beta = theta[: k + 1]
                sigma_a, xi_a = math.exp(theta[k + 1]), theta[k + 2]
                ll_a = _scenario_loglik(self.actual, beta, sigma_a, xi_a, tol)
                if not math.isfinite(ll_a):
                    return math.inf
                ll_c = cf_loglik(self._z_a(beta, sigma_a, xi_a), math.exp(theta[k + 3]), theta[k + 4])
                return -(ll_a + ll_c) if math.isfinite(ll_c) else math.inf

            a = self.actual.params
            warm = np.array(
                [*a.beta, math.log(a.sigma), a.xi, math.log(cf.params.sigma), cf.params.xi]
            )
            steps = np.concatenate(
                [
                    _location_steps(self.actual),
                    [SIMPLEX_LOG_SCALE_STEP, SIMPLEX_SHAPE_STEP],
                    [SIMPLEX_LOG_SCALE_STEP, SIMPLEX_SHAPE_STEP],
                ]
            )

        gumbel = warm.copy()
        gumbel[-1] = 0.0
        best: ConstrainedFit | None = None
        for label, theta0 in (("mle", warm), ("gumbel", gumbel)):
            if not math.isfinite(negloglik(theta0)):
                continue
            theta, value = _minimize(negloglik, theta0, steps, self.max_iterations)
            if math.isfinite(value) and (best is None or -value > best.loglik):
                best = ConstrainedFit(loglik=-value, theta=theta, start=label)
        if best is None:
            raise ConstrainedFitError(
                f"constrained likelihood is not finite at any start for r0={r0:.6g}",
                stage=mode.method.value,
            )
        return best


def lrt_statistic(r0: float, problem: LRTProblem, mode: LRTMode, config: LRTConfig | None = None) -> float:
    """``2 * (unconstrained - constrained)`` maximum log-likelihood, clipped at zero."""
    config = config or LRTConfig()
    mode = LRTMode(mode)
    key = (mode, float(r0))
    if key in problem._cache:
        return problem._cache[key]
    constrained = problem.constrained_fit(r0, mode)
    statistic = 2.0 * (problem.unconstrained_loglik(mode) - constrained.loglik)
    if statistic < -config.consistency_tolerance:
        raise LRTConsistencyError(
            f"constrained fit beat the unconstrained maximum by {-statistic / 2:.3g} "
            f"at log2 r0={math.log2(r0):.4g}",
            stage=mode.method.value,
            diagnostics={"r0": r0, "statistic": statistic},
        )
    statistic = max(statistic, 0.0)
    problem._cache[key] = statistic
    return statistic


def lrt_lower_bound(
    problem: LRTProblem, mode: LRTMode = LRTMode.JOINT, config: LRTConfig | None = None
) -> IntervalResult:
    """One-sided lower bound for log2 RR; ``upper`` is always infinite."""
    config = config or LRTConfig()
    mode = LRTMode(mode)
    crit = config.chisq_crit

    def statistic(t: float) -> float:
        return lrt_statistic(2.0**t, problem, mode, config)

    estimate = problem.log2_rr
    if math.isinf(estimate):
        hi = config.bracket_cap_log2
        at_cap = statistic(hi)
        if at_cap > crit:
            raise BracketTooSmallError(
                f"statistic {at_cap:.3g} at the cap log2 RR={hi} still rejects; raise the cap",
                stage=mode.method.value,
            )
    else:
        hi = estimate
    lo = max(config.bracket_lower_log2, math.log2(problem.p_a) + 0.01)
    diagnostics: dict = {"mode": mode.value, "critical_value": crit, "bracket": [lo, hi]}

    if hi <= lo or statistic(lo) <= crit:
        bound = min(lo, hi)
        diagnostics.update(method="bracket-edge", at_bracket_edge=True)
        logger.warning("LRT %s bound sits at the bracket edge log2 RR=%.3g", mode, bound)
    else:
        grid = np.linspace(lo, hi, config.scan_points)
        values = [statistic(t) for t in grid]
        diagnostics["scan"] = [[float(t), float(v)] for t, v in zip(grid, values, strict=True)]
        monotone = all(
            later <= earlier + config.scan_tolerance
            for earlier, later in zip(values, values[1:], strict=False)
        )
        if monotone:
            i = max(j for j, v in enumerate(values) if v > crit)
            result = bisect_sign_change(
                lambda t: statistic(t) - crit, grid[i], grid[i + 1], config.solver_tolerance
            )
        else:
            logger.info("LRT %s statistic is not monotone; minimizing the penalised bound", mode)

            def penalised(t: float) -> float:
                return t if statistic(t) <= crit else config.penalty - t

            result = bounded_minimum(penalised, lo, hi, config.solver_tolerance)
        bound = result.x
        diagnostics.update(
            method=result.method,
            evaluations=result.evaluations,
            monotone=monotone,
            at_bracket_edge=False,
        )

    diagnostics["statistic_at_bound"] = statistic(bound)
    logger.info("LRT %s lower bound for log2 RR: %.4g (estimate %.4g)", mode, bound, estimate)
    return IntervalResult(
        method=mode.method,
        level=config.level,
        lower=bound,
        upper=math.inf,
        estimate=estimate,
        diagnostics=diagnostics,
    )


def check_lrt_ordering(joint: IntervalResult, pc_only: IntervalResult, tolerance: float = 1e-2) -> bool:
    """The joint bound frees more parameters, so it should not exceed the pc-only bound."""
    ordered = joint.lower <= pc_only.lower + tolerance
    if not ordered:
        logger.warning(
            "Joint LRT bound %.4g exceeds the pc-only bound %.4g",
            joint.lower,
            pc_only.lower,
        )
    return ordered
