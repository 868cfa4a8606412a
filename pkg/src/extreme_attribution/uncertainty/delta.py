"""Normal-approximation interval for log2 RR by the delta method.

The actual and counterfactual fits are independent, so the joint covariance of their
parameters is block diagonal.
"""

import math

import numpy as np
from scipy import linalg, stats

from extreme_attribution.analysis.attribution import AttributionResult, log2_risk_ratio
from extreme_attribution.errors import MethodInapplicableError
from extreme_attribution.evd.core import GUMBEL_TOLERANCE, log_exceedance_at, return_level_at
from extreme_attribution.evd.numdiff import central_gradient
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import IntervalMethod, IntervalResult

logger = logging.getLogger(__name__)


def log2_rr_of_parameters(
    theta: np.ndarray,
    p_o: float,
    x_event: tuple[float, ...],
    tol: float = GUMBEL_TOLERANCE,
) -> float:
    """log2 RR as a function of ``(beta_A..., sigma_A, xi_A, mu_C, sigma_C, xi_C)``."""
    k = len(x_event)
    beta = theta[: k + 1]
    sigma_a, xi_a, mu_c, sigma_c, xi_c = theta[k + 1 :]
    if sigma_a <= 0 or sigma_c <= 0:
        return math.nan
    mu_event = beta[0] + float(np.dot(beta[1:], x_event))
    z_a = float(return_level_at(p_o, mu_event, sigma_a, xi_a, tol))
    return log2_risk_ratio(p_o, log_exceedance_at(z_a, mu_c, sigma_c, xi_c, tol))


def _stacked(attr: AttributionResult) -> tuple[np.ndarray, np.ndarray]:
    theta = np.concatenate(
        [attr.actual_fit.params.to_vector(), attr.counterfactual_fit.params.to_vector()]
    )
    covariance = linalg.block_diag(attr.actual_fit.covariance, attr.counterfactual_fit.covariance)
    return theta, covariance


def log2_rr_gradient(
    attr: AttributionResult, rel_step: float = 1e-4, floor: float = 1e-6
) -> np.ndarray:
    theta, _ = _stacked(attr)
    return central_gradient(
        lambda t: log2_rr_of_parameters(t, attr.p_o, attr.covariate_at_event),
        theta,
        rel_step,
        floor,
    )


def delta_interval(
    attr: AttributionResult, level: float = 0.95, rel_step: float = 1e-4
) -> IntervalResult:
    if attr.lrt_only:
        raise MethodInapplicableError(
            "RR is infinite (p_C = 0); the delta method does not apply", stage="delta"
        )
    theta, covariance = _stacked(attr)
    if not np.all(np.isfinite(covariance)):
        raise MethodInapplicableError("parameter covariance is not finite", stage="delta")
    gradient = log2_rr_gradient(attr, rel_step)
    if not np.all(np.isfinite(gradient)):
        raise MethodInapplicableError(
            "log2 RR is not differentiable at the estimate (z_A near a support bound)",
            stage="delta",
        )
    variance = float(gradient @ covariance @ gradient)
    if variance < 0:
        raise MethodInapplicableError(
            f"delta-method variance is negative ({variance:.3g})", stage="delta"
        )
    se = math.sqrt(variance)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    diagnostics = {
        "standard_error": se,
        "critical_value": z,
        "gradient": gradient.tolist(),
        "covariance": {
            "actual": attr.actual_fit.diagnostics.get("covariance", "inverse"),
            "counterfactual": attr.counterfactual_fit.diagnostics.get("covariance", "inverse"),
        },
    }
    logger.info("Delta-method standard error of log2 RR: %.4g", se)
    return IntervalResult(
        method=IntervalMethod.DELTA,
        level=level,
        lower=attr.log2_rr - z * se,
        upper=attr.log2_rr + z * se,
        estimate=attr.log2_rr,
        diagnostics=diagnostics,
    )
