"""Maximum-likelihood fitting of the point-process model to ensemble series."""

import dataclasses
import hashlib
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.linalg
from scipy import optimize

from extreme_attribution.data.series import Scenario, ScenarioSeries
from extreme_attribution.errors import (
    FitFailureError,
    InsufficientExceedancesError,
    InvalidInputError,
)
from extreme_attribution.evd.core import (
    GUMBEL_TOLERANCE,
    EVDParams,
    ExceedanceSet,
    pp_log_likelihood_raw,
)
from extreme_attribution.evd.numdiff import central_gradient, central_hessian
from extreme_attribution.logger import logging

logger = logging.getLogger(__name__)

# Above this condition number the observed information is inverted with pinv
CONDITION_LIMIT = 1e12

# Absolute step for the Newton refinement in optimizer coordinates
NEWTON_STEP = 1e-4


class CovariateMode(StrEnum):
    AUTO = "auto"
    STATIONARY = "stationary"
    LINEAR = "linear"


class BlockMode(StrEnum):
    # one block is one year of the whole ensemble (block size = ensemble size)
    ENSEMBLE = "ensemble"
    # one block is one member-year
    MEMBER = "member"


@dataclass(frozen=True)
class FitConfig:
    threshold_quantile: float = 0.80
    covariate_mode: CovariateMode = CovariateMode.AUTO
    block_mode: BlockMode = BlockMode.ENSEMBLE
    gumbel_tolerance: float = GUMBEL_TOLERANCE
    max_iterations: int = 4000
    tolerance: float = 1e-9
    hessian_step: float = 1e-4
    hessian_floor: float = 1e-6
    min_values: int = 30
    min_exceedances: int = 5

    def __post_init__(self):
        if not 0.0 < self.threshold_quantile < 1.0:
            raise InvalidInputError(
                f"threshold quantile must lie in (0, 1), got {self.threshold_quantile}"
            )
        object.__setattr__(self, "covariate_mode", CovariateMode(self.covariate_mode))
        object.__setattr__(self, "block_mode", BlockMode(self.block_mode))

    def with_mode(self, mode: CovariateMode) -> "FitConfig":
        return dataclasses.replace(self, covariate_mode=mode)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: EVDParams
    loglik: float
    covariance: np.ndarray
    threshold: float
    n_exceedances: int
    aic: float
    converged: bool
    mode: CovariateMode
    n_total: int
    n_per_year: int
    data_hash: str = ""
    diagnostics: dict = field(default_factory=dict)
    scenario: Scenario | None = None
    # the data the fit came from; absent when a fit is read back from a report
    exceedances: ExceedanceSet | None = None
    observation_covariates: np.ndarray | None = None
    years: np.ndarray | None = None
    covariate: np.ndarray | None = None

    @property
    def n_parameters(self) -> int:
        return len(self.params.beta) + 2

    @property
    def parameter_names(self) -> list[str]:
        return parameter_names(self.params.n_covariates)

    @property
    def standard_errors(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.sqrt(np.diag(self.covariance))

    def covariate_at(self, year: int | None) -> tuple[float, ...]:
        """The covariate vector the fitted location uses in ``year``."""
        if self.params.is_stationary:
            return ()
        if self.covariate is None or self.years is None:
            raise InvalidInputError("fit carries no covariate series")
        if year is None:
            raise InvalidInputError("a covariate-dependent fit needs an event year")
        (index,) = np.nonzero(self.years == year)
        if index.size == 0:
            raise InvalidInputError(
                f"year {year} outside the covariate range {self.years[0]}-{self.years[-1]}"
            )
        return (float(self.covariate[index[0]]),)


@dataclass(frozen=True)
class AICComparison:
    preferred: CovariateMode
    delta: float
    stationary_aic: float
    nonstationary_aic: float


@dataclass(frozen=True)
class MRLRow:
    threshold: float
    mean_excess: float
    std_error: float
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class MRLTable:
    rows: tuple[MRLRow, ...]

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([row.threshold for row in self.rows])


def parameter_names(n_covariates: int) -> list[str]:
    return [f"beta_{k}" for k in range(n_covariates + 1)] + ["sigma", "xi"]


def resolve_mode(series: ScenarioSeries, mode: CovariateMode) -> CovariateMode:
    """Turn ``auto`` into a concrete mode for this series."""
    mode = CovariateMode(mode)
    if mode is CovariateMode.AUTO:
        if series.covariate is not None and series.scenario is not Scenario.COUNTERFACTUAL:
            return CovariateMode.LINEAR
        return CovariateMode.STATIONARY
    if mode is CovariateMode.LINEAR and series.covariate is None:
        raise InvalidInputError(f"{series.scenario} series has no covariate for a linear fit")
    return mode


def select_threshold(series: ScenarioSeries | np.ndarray, q: float = 0.80) -> float:
    """Empirical ``q`` quantile (linear interpolation) of the pooled values."""
    if not 0.0 < q < 1.0:
        raise InvalidInputError(f"threshold quantile must lie in (0, 1), got {q}")
    values = series.pooled_values if isinstance(series, ScenarioSeries) else np.ravel(series)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InvalidInputError("cannot select a threshold for an empty series")
    return float(np.quantile(values, q, method="linear"))


def compute_data_hash(values: np.ndarray) -> str:
    # values only: stationary and covariate fits of one series must compare equal
    return hashlib.sha256(np.ascontiguousarray(values, dtype=float).tobytes()).hexdigest()


class _Standardizer:
    """Maps optimizer coordinates to natural parameters.

    Coordinates are ``(d_0, d_1..d_K, log_ratio, xi)`` with ``beta_0 = loc + scale*d_0``,
    ``beta_k = scale*d_k/spread_k`` and ``sigma = scale*exp(log_ratio)``, so a shift or
    rescaling of the data leaves the optimizer path unchanged.
    """

    def __init__(self, loc: float, scale: float, spreads: np.ndarray):
        self.loc = loc
        self.scale = scale
        self.spreads = spreads

    def to_natural(self, theta: np.ndarray) -> tuple[np.ndarray, float, float]:
        k = self.spreads.size
        beta = np.empty(k + 1)
        beta[0] = self.loc + self.scale * theta[0]
        beta[1:] = self.scale * theta[1 : k + 1] / self.spreads
        return beta, self.scale * math.exp(theta[k + 1]), float(theta[k + 2])

    def from_natural(self, vector: np.ndarray) -> np.ndarray:
        k = self.spreads.size
        theta = np.empty(k + 3)
        theta[0] = (vector[0] - self.loc) / self.scale
        theta[1 : k + 1] = vector[1 : k + 1] * self.spreads / self.scale
        theta[k + 1] = math.log(vector[k + 1] / self.scale)
        theta[k + 2] = vector[k + 2]
        return theta


def _moment_start(proxy: np.ndarray, fallback: np.ndarray) -> tuple[float, float]:
    """Method-of-moments Gumbel location and scale for block-maximum proxies."""
    scale = float(np.std(proxy, ddof=1)) * math.sqrt(6.0) / math.pi if proxy.size > 1 else 0.0
    if not (math.isfinite(scale) and scale > 0):
        scale = float(np.std(fallback))
    if not (math.isfinite(scale) and scale > 0):
        scale = 1.0
    return float(np.mean(proxy)) - np.euler_gamma * scale, scale


def observed_information_covariance(hessian: np.ndarray) -> tuple[np.ndarray, str]:
    """Covariance from a log-likelihood Hessian and a label for how it was obtained."""
    n = hessian.shape[0]
    if not np.all(np.isfinite(hessian)):
        return np.full((n, n), np.nan), "non-finite"
    info = -0.5 * (hessian + hessian.T)
    try:
        if np.linalg.cond(info) < CONDITION_LIMIT:
            cov = np.linalg.inv(info)
            label = "inverse"
        else:
            cov = np.linalg.pinv(info)
            label = "pseudo-inverse"
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
        label = "pseudo-inverse"
    cov = 0.5 * (cov + cov.T)
    if np.min(np.linalg.eigvalsh(cov)) < -1e-8 * max(1.0, float(np.max(np.abs(cov)))):
        label = f"{label}, indefinite"
    return cov, label


def _newton_refine(
    negloglik: Callable[[np.ndarray], float],
    theta: np.ndarray,
    value: float,
    max_steps: int = 8,
) -> tuple[np.ndarray, float, int]:
    """Newton steps on the finite-difference gradient from an optimizer's answer.

    The result sits where the gradient of the surface vanishes, whatever path the
    optimizer took to get near it. Steps are taken only while the Hessian is
    positive definite and the objective does not rise.
    """
    steps = 0
    for _ in range(max_steps):
        grad = central_gradient(negloglik, theta, 0.0, NEWTON_STEP)
        hess = central_hessian(negloglik, theta, 0.0, NEWTON_STEP)
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            break
        try:
            factor = scipy.linalg.cho_factor(0.5 * (hess + hess.T))
        except np.linalg.LinAlgError:
            break
        delta = scipy.linalg.cho_solve(factor, grad)
        candidate = theta - delta
        candidate_value = negloglik(candidate)
        if not (math.isfinite(candidate_value) and candidate_value <= value + 1e-9):
            break
        theta, value = candidate, candidate_value
        steps += 1
        if np.max(np.abs(delta)) < 1e-12:
            break
    return theta, value, steps


def fit_matrix(
    values: np.ndarray,
    covariates: np.ndarray | None,
    config: FitConfig,
    mode: CovariateMode,
) -> FitResult:
    """Fit the PP model to a members x years value matrix.

    ``covariates`` has the shape of ``values`` and is used only when ``mode`` is
    ``linear``. ``mode`` must already be resolved (not ``auto``).
    """
    if mode is CovariateMode.AUTO:
        raise InvalidInputError("fit_matrix needs a resolved covariate mode")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("values must be finite")
    if values.size < config.min_values:
        raise InvalidInputError(
            f"need at least {config.min_values} values to fit, got {values.size}"
        )
    if mode is CovariateMode.LINEAR:
        if covariates is None:
            raise InvalidInputError("linear mode needs a covariate")
        covariates = np.broadcast_to(np.asarray(covariates, dtype=float), values.shape)
        obs_cov = covariates.reshape(-1, 1)
    else:
        obs_cov = None

    members, n_years = values.shape
    n_per_year = members if config.block_mode is BlockMode.ENSEMBLE else 1
    flat = values.reshape(-1)
    threshold = select_threshold(flat, config.threshold_quantile)
    if config.block_mode is BlockMode.ENSEMBLE:
        block_index = np.tile(np.arange(n_years), members)
        proxy = values.max(axis=0)
    else:
        block_index = np.arange(flat.size)
        proxy = flat
    data = ExceedanceSet.from_observations(flat, threshold, n_per_year, obs_cov, block_index)
    if data.n_exceedances < config.min_exceedances:
        raise InsufficientExceedancesError(
            f"only {data.n_exceedances} values exceed the threshold {threshold:.6g}; "
            f"need at least {config.min_exceedances}"
        )
    if np.ptp(data.values) == 0:
        raise FitFailureError("all exceedances are equal; the likelihood is degenerate")

    loc0, scale0 = _moment_start(proxy, flat)
    if obs_cov is not None:
        spread = float(np.std(obs_cov))
        spreads = np.array([spread if spread > 0 else 1.0])
    else:
        spreads = np.empty(0)
    std = _Standardizer(loc0, scale0, spreads)
    k = spreads.size
    tol = config.gumbel_tolerance

    def negloglik(theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)) or theta[k + 1] > 50:
            return math.inf
        beta, sigma, xi = std.to_natural(theta)
        ll = pp_log_likelihood_raw(data, beta, sigma, xi, obs_cov, tol)
        return -ll if math.isfinite(ll) else math.inf

    starts = []
    for log_ratio, xi0 in ((0.0, -0.1), (0.0, 0.1), (math.log(2.0), -0.1), (0.0, 0.0)):
        theta0 = np.zeros(k + 3)
        theta0[k + 1] = log_ratio
        theta0[k + 2] = xi0
        starts.append(theta0)
    scored = sorted(
        ((negloglik(theta0), i, theta0) for i, theta0 in enumerate(starts)),
        key=lambda item: item[0],
    )
    scored = [item for item in scored if math.isfinite(item[0])]
    if not scored:
        raise FitFailureError("the likelihood is not finite at any starting value")

    dim = k + 3
    best = None
    for _, start_index, theta0 in scored:
        simplex = np.vstack([theta0, theta0 + 0.1 * np.eye(dim)])
        with np.errstate(all="ignore"):
            nm = optimize.minimize(
                negloglik,
                theta0,
                method="Nelder-Mead",
                options={
                    "maxiter": config.max_iterations,
                    "maxfev": 2 * config.max_iterations,
                    "xatol": 1e-8,
                    "fatol": config.tolerance,
                    "initial_simplex": simplex,
                    "adaptive": dim > 3,
                },
            )
            polish = optimize.minimize(negloglik, nm.x, method="BFGS", options={"gtol": 1e-6})
        polished = bool(math.isfinite(polish.fun) and polish.fun <= nm.fun)
        theta_hat = polish.x if polished else nm.x
        value = float(polish.fun) if polished else float(nm.fun)
        converged = bool(nm.success or (polished and polish.success))
        if best is None or value < best[0] - 1e-9:
            best = (value, theta_hat, converged, start_index, nm, polished)
        if converged:
            break

    value, theta_hat, converged, start_index, nm, polished = best
    if not math.isfinite(value):
        raise FitFailureError("optimizer ended at a non-finite likelihood")
    theta_hat, value, newton_steps = _newton_refine(negloglik, theta_hat, value)
    beta, sigma, xi = std.to_natural(theta_hat)
    params = EVDParams(tuple(beta), sigma, xi)
    loglik = -value

    def natural_loglik(vector: np.ndarray) -> float:
        return pp_log_likelihood_raw(
            data, vector[: k + 1], vector[k + 1], vector[k + 2], obs_cov, tol
        )

    hessian = central_hessian(
        natural_loglik, params.to_vector(), config.hessian_step, config.hessian_floor
    )
    covariance, inversion = observed_information_covariance(hessian)
    n_params = k + 3
    diagnostics = {
        "optimizer": "nelder-mead+bfgs" if polished else "nelder-mead",
        "iterations": int(nm.nit),
        "message": str(nm.message),
        "start": int(start_index),
        "newton_steps": newton_steps,
        "covariance": inversion,
    }
    if not converged:
        logger.warning("PP fit did not converge: %s", nm.message)
    if inversion != "inverse":
        logger.warning("Observed information needed a %s", inversion)

    return FitResult(
        params=params,
        loglik=loglik,
        covariance=covariance,
        threshold=threshold,
        n_exceedances=data.n_exceedances,
        aic=2.0 * n_params - 2.0 * loglik,
        converged=converged,
        mode=mode,
        n_total=data.n_total,
        n_per_year=n_per_year,
        data_hash=compute_data_hash(values),
        diagnostics=diagnostics,
        exceedances=data,
        observation_covariates=obs_cov,
    )


def fit_pp(series: ScenarioSeries, config: FitConfig | None = None) -> FitResult:
    """Fit one scenario series, pooling members and years."""
    config = config or FitConfig()
    mode = resolve_mode(series, config.covariate_mode)
    covariates = None
    if mode is CovariateMode.LINEAR:
        covariates = np.broadcast_to(series.covariate, series.values.shape)
    result = fit_matrix(series.values, covariates, config, mode)
    logger.info(
        "Fitted %s series (%s, %d exceedances above %.4g): %s",
        series.scenario,
        mode,
        result.n_exceedances,
        result.threshold,
        result.params,
    )
    return dataclasses.replace(
        result,
        scenario=series.scenario,
        years=series.years,
        covariate=series.covariate if mode is CovariateMode.LINEAR else None,
    )


def compare_aic(stationary: FitResult, nonstationary: FitResult) -> AICComparison:
    """AIC comparison of two fits to the same data; ties prefer the stationary model."""
    if not (stationary.converged and nonstationary.converged):
        raise InvalidInputError("AIC comparison needs two converged fits")
    if stationary.data_hash != nonstationary.data_hash:
        raise InvalidInputError("fits were made on different data")
    if stationary.threshold != nonstationary.threshold:
        raise InvalidInputError("fits used different thresholds")
    delta = nonstationary.aic - stationary.aic
    preferred = CovariateMode.STATIONARY if delta >= 0 else CovariateMode.LINEAR
    return AICComparison(
        preferred=preferred,
        delta=delta,
        stationary_aic=stationary.aic,
        nonstationary_aic=nonstationary.aic,
    )


def mean_residual_life(
    series: ScenarioSeries | np.ndarray, thresholds: np.ndarray
) -> MRLTable:
    """Mean excess over each threshold with its standard error."""
    values = series.pooled_values if isinstance(series, ScenarioSeries) else np.ravel(series)
    values = np.asarray(values, dtype=float)
    thresholds = np.unique(np.asarray(thresholds, dtype=float))
    rows = []
    for u in thresholds:
        excess = values[values > u] - u
        count = int(excess.size)
        mean = float(np.mean(excess)) if count else math.nan
        se = float(np.std(excess, ddof=1) / math.sqrt(count)) if count > 1 else math.nan
        rows.append(MRLRow(threshold=float(u), mean_excess=mean, std_error=se, count=count))
    return MRLTable(rows=tuple(rows))


def default_mrl_thresholds(series: ScenarioSeries, n_points: int = 50) -> np.ndarray:
    values = series.pooled_values
    return np.linspace(float(np.min(values)), float(np.quantile(values, 0.98)), n_points)
