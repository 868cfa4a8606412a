"""Closed-form extreme-value mathematics.

GEV tail probabilities and return levels, support bounds, the generalized Pareto
distribution function, and the point-process (PP) log-likelihood for threshold
exceedances with a location that may depend linearly on covariates.

Everything here is a pure function of immutable inputs.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from extreme_attribution.errors import InvalidInputError

# |xi| below this switches to the xi -> 0 (Gumbel) limit formulas
GUMBEL_TOLERANCE = 1e-8

CovariateLike = Sequence[float] | np.ndarray | float | None


@dataclass(frozen=True)
class EVDParams:
    """Location coefficients, scale and shape of a GEV/PP model.

    ``beta[0]`` is the intercept and ``beta[1:]`` the covariate slopes, so the location
    at covariate vector ``x`` is ``beta[0] + sum(beta[k] * x[k-1])``. A single-element
    ``beta`` is the stationary model with location ``mu = beta[0]``.
    """

    beta: tuple[float, ...]
    sigma: float
    xi: float

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if not beta:
            raise InvalidInputError("EVDParams needs at least a location intercept")
        if not all(math.isfinite(b) for b in beta):
            raise InvalidInputError(f"location coefficients must be finite, got {beta}")
        sigma = float(self.sigma)
        xi = float(self.xi)
        if not (math.isfinite(sigma) and sigma > 0):
            raise InvalidInputError(f"scale must be positive and finite, got {sigma}")
        if not math.isfinite(xi):
            raise InvalidInputError(f"shape must be finite, got {xi}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "xi", xi)

    @classmethod
    def stationary(cls, mu: float, sigma: float, xi: float) -> "EVDParams":
        return cls((mu,), sigma, xi)

    @classmethod
    def from_vector(cls, vector: Sequence[float], n_covariates: int = 0) -> "EVDParams":
        """Inverse of ``to_vector``: ``(beta_0, ..., beta_K, sigma, xi)``."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (n_covariates + 3,):
            raise InvalidInputError(
                f"expected {n_covariates + 3} parameters, got shape {vector.shape}"
            )
        return cls(tuple(vector[: n_covariates + 1]), vector[-2], vector[-1])

    @property
    def n_covariates(self) -> int:
        return len(self.beta) - 1

    @property
    def is_stationary(self) -> bool:
        return self.n_covariates == 0

    def to_vector(self) -> np.ndarray:
        return np.array([*self.beta, self.sigma, self.xi], dtype=float)

    def location(self, x: CovariateLike = None) -> float:
        x = as_covariate(x, self.n_covariates)
        if x.size == 0:
            return self.beta[0]
        return self.beta[0] + float(np.dot(self.beta[1:], x))

    def locations(self, covariates: np.ndarray | None) -> np.ndarray | float:
        """Locations for a matrix of covariate rows; the intercept when stationary."""
        if self.is_stationary:
            return self.beta[0]
        if covariates is None:
            raise InvalidInputError("covariate-dependent location needs covariates")
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim != 2 or covariates.shape[1] != self.n_covariates:
            raise InvalidInputError(
                f"covariates must have shape (n, {self.n_covariates}), got {covariates.shape}"
            )
        return locations_from_beta(np.asarray(self.beta), covariates)


@dataclass(frozen=True)
class Support:
    lower: float
    upper: float


@dataclass(frozen=True, eq=False)
class ExceedanceSet:
    """Threshold exceedances plus the counts the PP intensity term needs.

    ``covariates`` holds one row per exceedance and ``years`` the block index each
    exceedance belongs to. ``n_total`` counts every observation, exceeding or not, and
    ``n_per_year`` is the number of observations in one block (the ensemble size).
    """

    threshold: float
    values: np.ndarray
    covariates: np.ndarray
    years: np.ndarray
    n_total: int
    n_per_year: int

    def __post_init__(self):
        values = _frozen(np.asarray(self.values, dtype=float).reshape(-1))
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim == 1 and covariates.size == 0:
            covariates = covariates.reshape(values.size, 0)
        covariates = _frozen(covariates)
        years = _frozen(np.asarray(self.years, dtype=int).reshape(-1))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "years", years)

        if not math.isfinite(self.threshold):
            raise InvalidInputError("threshold must be finite")
        if np.any(values <= self.threshold):
            raise InvalidInputError("every exceedance must lie above the threshold")
        if covariates.ndim != 2 or covariates.shape[0] != values.size:
            raise InvalidInputError("need one covariate row per exceedance")
        if years.size != values.size:
            raise InvalidInputError("need one block index per exceedance")
        if self.n_per_year < 1:
            raise InvalidInputError("n_per_year must be at least 1")
        if not values.size <= self.n_total:
            raise InvalidInputError("more exceedances than observations")
        if self.n_total % self.n_per_year != 0:
            raise InvalidInputError(
                f"n_total={self.n_total} is not a whole number of blocks of {self.n_per_year}"
            )

    @classmethod
    def from_observations(
        cls,
        values: np.ndarray,
        threshold: float,
        n_per_year: int,
        covariates: np.ndarray | None = None,
        years: np.ndarray | None = None,
    ) -> "ExceedanceSet":
        """Select the observations strictly above ``threshold``."""
        values = np.asarray(values, dtype=float).reshape(-1)
        if covariates is None:
            covariates = np.empty((values.size, 0))
        covariates = np.asarray(covariates, dtype=float).reshape(values.size, -1)
        if years is None:
            years = np.arange(values.size) // n_per_year
        mask = values > threshold
        return cls(
            threshold=float(threshold),
            values=values[mask],
            covariates=covariates[mask],
            years=np.asarray(years)[mask],
            n_total=int(values.size),
            n_per_year=int(n_per_year),
        )

    @property
    def n_exceedances(self) -> int:
        return int(self.values.size)

    @property
    def n_covariates(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def n_years(self) -> int:
        return self.n_total // self.n_per_year


def as_covariate(x: CovariateLike, n_covariates: int) -> np.ndarray:
    if x is None:
        x = np.empty(0)
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if x.size != n_covariates:
        raise InvalidInputError(f"expected {n_covariates} covariate values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"covariate values must be finite, got {x}")
    return x


def locations_from_beta(beta: np.ndarray, covariates: np.ndarray | None) -> np.ndarray | float:
    if len(beta) == 1 or covariates is None:
        return float(beta[0])
    return beta[0] + covariates @ beta[1:]


def tail_measure(s: np.ndarray | float, xi: float, tol: float = GUMBEL_TOLERANCE) -> np.ndarray:
    """``[1 + xi*s]_+ ** (-1/xi)`` elementwise for reduced values ``s = (z - mu)/sigma``.

    Zero above a finite upper bound and +inf below a finite lower bound.
    """
    s = np.asarray(s, dtype=float)
    if abs(xi) < tol:
        with np.errstate(over="ignore"):
            return np.exp(-s)
    bracket = 1.0 + xi * s
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        measure = np.exp(-np.log(bracket) / xi)
    return np.where(bracket > 0, measure, 0.0 if xi < 0 else np.inf)


def log_tail_measure(
    s: np.ndarray | float, xi: float, tol: float = GUMBEL_TOLERANCE
) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if abs(xi) < tol:
        return -s
    bracket = 1.0 + xi * s
    with np.errstate(divide="ignore", invalid="ignore"):
        log_measure = -np.log(bracket) / xi
    return np.where(bracket > 0, log_measure, -np.inf if xi < 0 else np.inf)


def exceedance_at(
    z: np.ndarray | float, mu: np.ndarray | float, sigma: float, xi: float,
    tol: float = GUMBEL_TOLERANCE,
) -> np.ndarray:
    """Vectorized ``P(Z > z)`` from a location value rather than coefficients."""
    measure = tail_measure((np.asarray(z, dtype=float) - mu) / sigma, xi, tol)
    return -np.expm1(-measure)


def log_exceedance_at(
    z: float, mu: float, sigma: float, xi: float, tol: float = GUMBEL_TOLERANCE
) -> float:
    """``log P(Z > z)`` without underflow; -inf above a finite upper bound."""
    log_t = float(log_tail_measure((z - mu) / sigma, xi, tol))
    if log_t == -math.inf:
        return -math.inf
    t = math.exp(log_t) if log_t < 709.0 else math.inf
    if t == 0.0:
        # 1 - exp(-t) ~ t once t underflows
        return log_t
    if math.isinf(t):
        return 0.0
    return math.log(-math.expm1(-t))


def return_level_at(
    p: np.ndarray | float, mu: np.ndarray | float, sigma: float, xi: float,
    tol: float = GUMBEL_TOLERANCE,
) -> np.ndarray:
    """Vectorized level exceeded with probability ``p`` for location value(s) ``mu``."""
    with np.errstate(divide="ignore"):
        log_y = np.log(-np.log1p(-np.asarray(p, dtype=float)))
    if abs(xi) < tol:
        return mu - sigma * log_y
    with np.errstate(over="ignore", invalid="ignore"):
        return mu + sigma * np.expm1(-xi * log_y) / xi


def _check_finite(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value}")
    return value


def gev_exceedance_prob(
    z: float, params: EVDParams, x: CovariateLike = None, *, tol: float = GUMBEL_TOLERANCE
) -> float:
    """Probability that one block value exceeds ``z``.

    Exactly 0 at or above a finite upper bound and exactly 1 at or below a finite lower
    bound.
    """
    z = _check_finite(z, "z")
    mu = params.location(x)
    return float(exceedance_at(z, mu, params.sigma, params.xi, tol))


def gev_log_exceedance_prob(
    z: float, params: EVDParams, x: CovariateLike = None, *, tol: float = GUMBEL_TOLERANCE
) -> float:
    z = _check_finite(z, "z")
    mu = params.location(x)
    return log_exceedance_at(z, mu, params.sigma, params.xi, tol)


def gev_return_level(
    p: float, params: EVDParams, x: CovariateLike = None, *, tol: float = GUMBEL_TOLERANCE
) -> float:
    """Level ``z`` with ``P(Z > z) = p``; the inverse of ``gev_exceedance_prob``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"probability must lie in (0, 1), got {p}")
    mu = params.location(x)
    return float(return_level_at(p, mu, params.sigma, params.xi, tol))


def support_bounds(params: EVDParams, x: CovariateLike = None) -> Support:
    mu = params.location(x)
    if params.xi < 0:
        return Support(lower=-math.inf, upper=mu - params.sigma / params.xi)
    if params.xi > 0:
        return Support(lower=mu - params.sigma / params.xi, upper=math.inf)
    return Support(lower=-math.inf, upper=math.inf)


def gpd_exceedance_cdf(
    x: float, u: float, sigma_u: float, xi: float, *, tol: float = GUMBEL_TOLERANCE
) -> float:
    """Generalized Pareto distribution function of the excess ``x - u``."""
    x = _check_finite(x, "x")
    u = _check_finite(u, "u")
    if x <= u:
        raise InvalidInputError(f"x={x} must exceed the threshold u={u}")
    if not sigma_u > 0:
        raise InvalidInputError(f"sigma_u must be positive, got {sigma_u}")
    return float(1.0 - tail_measure((x - u) / sigma_u, xi, tol))


def block_maximum_params(params: EVDParams, m: int) -> EVDParams:
    """GEV parameters of the maximum of ``m`` independent draws from ``params``."""
    if m < 1:
        raise InvalidInputError(f"block size must be at least 1, got {m}")
    if m == 1:
        return params
    log_m = math.log(m)
    if abs(params.xi) < GUMBEL_TOLERANCE:
        shift, scale = params.sigma * log_m, params.sigma
    else:
        shift = params.sigma * math.expm1(params.xi * log_m) / params.xi
        scale = params.sigma * math.exp(params.xi * log_m)
    return EVDParams((params.beta[0] + shift, *params.beta[1:]), scale, params.xi)


def pp_log_likelihood_raw(
    data: ExceedanceSet,
    beta: np.ndarray,
    sigma: float,
    xi: float,
    covariates: np.ndarray | None = None,
    tol: float = GUMBEL_TOLERANCE,
) -> float:
    """``pp_log_likelihood`` on a bare coefficient vector, skipping validation.

    Used inside optimizer objectives where the parameters change on every call.
    """
    if not sigma > 0:
        return -math.inf
    mu_all = locations_from_beta(beta, covariates)
    if np.ndim(mu_all) == 0:
        intensity = data.n_total / data.n_per_year * float(
            tail_measure((data.threshold - mu_all) / sigma, xi, tol)
        )
    else:
        intensity = float(np.sum(tail_measure((data.threshold - mu_all) / sigma, xi, tol)))
        intensity /= data.n_per_year
    if not math.isfinite(intensity):
        return -math.inf

    m = data.n_exceedances
    if m == 0:
        return -intensity
    mu_exceed = locations_from_beta(beta, data.covariates if len(beta) > 1 else None)
    s = (data.values - mu_exceed) / sigma
    if abs(xi) < tol:
        density = -m * math.log(sigma) - float(np.sum(s))
    else:
        bracket = 1.0 + xi * s
        if np.any(bracket <= 0):
            return -math.inf
        density = -m * math.log(sigma) - (1.0 / xi + 1.0) * float(np.sum(np.log(bracket)))
    loglik = density - intensity
    return loglik if not math.isnan(loglik) else -math.inf


def pp_log_likelihood(
    data: ExceedanceSet,
    params: EVDParams,
    covariates: np.ndarray | None = None,
    *,
    tol: float = GUMBEL_TOLERANCE,
) -> float:
    """Point-process log-likelihood of an exceedance set.

    ``covariates`` has one row per observation (all ``n_total`` of them) and feeds the
    intensity sum; the exceedance rows come from ``data.covariates``. With a stationary
    model the intensity sum collapses to ``n_total / n_per_year`` times one bracket.
    Returns -inf when an exceedance lies outside the support.
    """
    if params.n_covariates != data.n_covariates:
        raise InvalidInputError(
            f"model has {params.n_covariates} covariates, data has {data.n_covariates}"
        )
    if params.n_covariates > 0:
        if covariates is None:
            raise InvalidInputError("covariate-dependent likelihood needs per-observation covariates")
        covariates = np.asarray(covariates, dtype=float).reshape(data.n_total, -1)
        if covariates.shape[1] != params.n_covariates:
            raise InvalidInputError("covariate columns do not match the model")
    else:
        covariates = None
    return pp_log_likelihood_raw(
        data, np.asarray(params.beta), params.sigma, params.xi, covariates, tol
    )


def gev_sample(
    params: EVDParams,
    size: int | tuple[int, ...],
    rng: np.random.Generator,
    locations: np.ndarray | float | None = None,
) -> np.ndarray:
    """Inverse-CDF draws; ``locations`` broadcasts against ``size`` (defaults to beta_0)."""
    if locations is None:
        if not params.is_stationary:
            raise InvalidInputError("sampling a covariate model needs explicit locations")
        locations = params.beta[0]
    p = rng.uniform(np.finfo(float).tiny, 1.0, size=size)
    return return_level_at(p, np.asarray(locations, dtype=float), params.sigma, params.xi)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array
