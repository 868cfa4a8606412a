"""Low-pass filtering of the covariate series (default: 13-point binomial filter)."""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.special import comb

from extreme_attribution.data.series import ScenarioSeries
from extreme_attribution.errors import InvalidInputError


class WeightRule(StrEnum):
    BINOMIAL = "binomial"
    UNIFORM = "uniform"


class EndpointPolicy(StrEnum):
    # values are numpy.pad modes
    REFLECT = "reflect"
    SYMMETRIC = "symmetric"
    EDGE = "edge"


@dataclass(frozen=True)
class SmootherSpec:
    window: int = 13
    weight_rule: WeightRule = WeightRule.BINOMIAL
    endpoint: EndpointPolicy = EndpointPolicy.REFLECT

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidInputError(f"smoothing window must be odd and positive, got {self.window}")
        object.__setattr__(self, "weight_rule", WeightRule(self.weight_rule))
        object.__setattr__(self, "endpoint", EndpointPolicy(self.endpoint))

    def weights(self) -> np.ndarray:
        if self.weight_rule is WeightRule.UNIFORM:
            return np.full(self.window, 1.0 / self.window)
        n = self.window - 1
        return np.array([comb(n, k, exact=True) for k in range(self.window)], dtype=float) / 2.0**n


def smooth_covariate(raw: np.ndarray, spec: SmootherSpec | None = None) -> np.ndarray:
    spec = spec or SmootherSpec()
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1:
        raise InvalidInputError("covariate must be one-dimensional")
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError("covariate contains non-finite values")
    if raw.size < spec.window:
        raise InvalidInputError(
            f"covariate has {raw.size} values, shorter than the {spec.window}-point window"
        )
    half = spec.window // 2
    padded = np.pad(raw, half, mode=spec.endpoint.value)
    return np.convolve(padded, spec.weights(), mode="valid")


def smooth_series_covariate(series: ScenarioSeries, spec: SmootherSpec | None = None) -> ScenarioSeries:
    if series.covariate is None:
        raise InvalidInputError(f"{series.scenario} series has no covariate to smooth")
    return series.with_covariate(smooth_covariate(series.covariate, spec))
