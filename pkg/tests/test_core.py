import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import COUNTERFACTUAL_PARAMS
from extreme_attribution.errors import InvalidInputError
from extreme_attribution.evd.core import (
    EVDParams,
    ExceedanceSet,
    block_maximum_params,
    gev_exceedance_prob,
    gev_log_exceedance_prob,
    gev_return_level,
    gev_sample,
    gpd_exceedance_cdf,
    pp_log_likelihood,
    support_bounds,
)


def test_counterfactual_probability_of_actual_return_level():
    p_c = gev_exceedance_prob(4.842, COUNTERFACTUAL_PARAMS)
    assert 1.0e-8 <= p_c <= 2.3e-8


def test_log2_risk_ratio_of_published_probabilities():
    assert math.log2(0.032 / 1.503e-08) == pytest.approx(21.0, abs=0.1)


def test_counterfactual_upper_bound():
    support = support_bounds(COUNTERFACTUAL_PARAMS)
    assert 4.90 <= support.upper <= 5.05
    assert support.lower == -math.inf
    assert gev_exceedance_prob(5.0, COUNTERFACTUAL_PARAMS) == 0.0
    assert gev_log_exceedance_prob(5.0, COUNTERFACTUAL_PARAMS) == -math.inf


@pytest.mark.parametrize("xi", [-0.4, -0.2, -1e-9, 0.0, 1e-9, 0.2, 0.4])
@pytest.mark.parametrize("p", [1e-8, 1e-4, 0.032, 0.5, 0.99])
def test_return_level_inverts_exceedance_probability(xi, p):
    params = EVDParams.stationary(0.5, 1.3, xi)
    z = gev_return_level(p, params)
    assert gev_exceedance_prob(z, params) == pytest.approx(p, rel=1e-10)


@pytest.mark.parametrize("xi", [-0.3, 0.0, 0.3])
def test_matches_scipy_genextreme(xi):
    params = EVDParams.stationary(1.0, 2.0, xi)
    for z in np.linspace(-2.0, 6.0, 17):
        # scipy's shape parameter has the opposite sign
        expected = stats.genextreme.sf(z, -xi, loc=1.0, scale=2.0)
        assert gev_exceedance_prob(z, params) == pytest.approx(expected, rel=1e-9, abs=1e-15)


@given(z=st.floats(-3.0, 8.0), sign=st.sampled_from([-1.0, 1.0]))
def test_gumbel_limit_is_continuous(z, sign):
    gumbel = gev_exceedance_prob(z, EVDParams.stationary(0.0, 1.0, 0.0))
    assert gev_exceedance_prob(z, EVDParams.stationary(0.0, 1.0, sign * 1e-9)) == gumbel
    assert gev_exceedance_prob(z, EVDParams.stationary(0.0, 1.0, sign * 1e-7)) == pytest.approx(
        gumbel, rel=1e-5
    )


@given(
    z1=st.floats(-5, 5),
    z2=st.floats(-5, 5),
    xi=st.floats(-0.5, 0.5),
)
def test_exceedance_probability_is_non_increasing(z1, z2, xi):
    params = EVDParams.stationary(0.0, 1.0, xi)
    lo, hi = sorted((z1, z2))
    assert gev_exceedance_prob(lo, params) >= gev_exceedance_prob(hi, params)


def test_below_positive_shape_lower_bound_is_certain():
    params = EVDParams.stationary(0.0, 1.0, 0.5)
    support = support_bounds(params)
    assert support.lower == pytest.approx(-2.0)
    assert support.upper == math.inf
    assert gev_exceedance_prob(-2.5, params) == 1.0
    assert gev_log_exceedance_prob(-2.5, params) == 0.0


def test_log_exceedance_survives_underflow():
    params = EVDParams.stationary(0.0, 1.0, 0.0)
    assert gev_exceedance_prob(800.0, params) == 0.0
    assert gev_log_exceedance_prob(800.0, params) == pytest.approx(-800.0)


def test_covariate_shifts_location():
    params = EVDParams((1.0, 2.0), 1.0, -0.1)
    assert params.location(0.5) == pytest.approx(2.0)
    assert gev_return_level(0.1, params, 0.5) == pytest.approx(
        gev_return_level(0.1, EVDParams.stationary(2.0, 1.0, -0.1))
    )
    with pytest.raises(InvalidInputError):
        params.location(None)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"beta": (0.0,), "sigma": 0.0, "xi": 0.1},
        {"beta": (0.0,), "sigma": -1.0, "xi": 0.1},
        {"beta": (math.nan,), "sigma": 1.0, "xi": 0.1},
        {"beta": (0.0,), "sigma": 1.0, "xi": math.inf},
    ],
)
def test_invalid_parameters_are_rejected(kwargs):
    with pytest.raises(InvalidInputError):
        EVDParams(**kwargs)


def test_non_finite_inputs_are_rejected():
    params = EVDParams.stationary(0.0, 1.0, 0.1)
    with pytest.raises(InvalidInputError):
        gev_exceedance_prob(math.nan, params)
    with pytest.raises(InvalidInputError):
        gev_return_level(0.0, params)
    with pytest.raises(InvalidInputError):
        gev_return_level(1.0, params)


def test_gpd_exceedance_cdf():
    assert gpd_exceedance_cdf(3.0, 2.0, 1.0, 1.0) == pytest.approx(0.5)
    assert gpd_exceedance_cdf(3.0, 2.0, 1.0, 0.0) == pytest.approx(1.0 - math.exp(-1.0))
    # beyond the upper end point of a negative shape
    assert gpd_exceedance_cdf(10.0, 2.0, 1.0, -0.5) == 1.0
    with pytest.raises(InvalidInputError):
        gpd_exceedance_cdf(2.0, 2.0, 1.0, 0.1)


def _literal_pp_loglik(values, n_total, n_per_year, u, mu, sigma, xi):
    excess = 1.0 + xi * (values - mu) / sigma
    density = -values.size * math.log(sigma) - (1.0 / xi + 1.0) * np.sum(np.log(excess))
    intensity = n_total / n_per_year * (1.0 + xi * (u - mu) / sigma) ** (-1.0 / xi)
    return density - intensity


def test_stationary_pp_likelihood_matches_closed_form():
    rng = np.random.default_rng(3)
    params = EVDParams.stationary(0.3, 1.1, -0.15)
    values = gev_sample(params, 500, rng)
    data = ExceedanceSet.from_observations(values, 1.2, n_per_year=5)
    expected = _literal_pp_loglik(data.values, 500, 5, 1.2, 0.3, 1.1, -0.15)
    assert pp_log_likelihood(data, params) == pytest.approx(expected, rel=1e-12)


def test_nonstationary_intensity_sums_over_observations():
    values = np.array([0.0, 0.5, 2.0, 3.0])
    covariates = np.array([[0.0], [0.0], [1.0], [1.0]])
    data = ExceedanceSet.from_observations(values, 1.0, n_per_year=1, covariates=covariates)
    params = EVDParams((0.0, 1.0), 1.0, 0.0)
    # Gumbel: density sum of -(x - mu), intensity sum of exp(-(u - mu))
    expected = -((2.0 - 1.0) + (3.0 - 1.0)) - (2 * math.exp(-1.0) + 2 * math.exp(0.0))
    assert pp_log_likelihood(data, params, covariates) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(InvalidInputError):
        pp_log_likelihood(data, params)


def test_exceedance_outside_support_gives_minus_infinity():
    data = ExceedanceSet.from_observations(np.array([0.0, 1.0, 2.0, 9.0]), 0.5, n_per_year=1)
    params = EVDParams.stationary(0.0, 1.0, -0.5)  # upper bound 2
    assert pp_log_likelihood(data, params) == -math.inf


def test_block_maximum_params_are_max_stable():
    params = EVDParams.stationary(0.2, 0.8, -0.2)
    block = block_maximum_params(params, 5)
    for z in (0.0, 1.0, 2.0, 3.0):
        single = 1.0 - gev_exceedance_prob(z, params)
        assert 1.0 - gev_exceedance_prob(z, block) == pytest.approx(single**5, rel=1e-12)
    assert block_maximum_params(params, 1) == params
    gumbel = block_maximum_params(EVDParams.stationary(0.0, 1.0, 0.0), 12)
    assert gumbel.beta[0] == pytest.approx(math.log(12))
    assert gumbel.sigma == 1.0


@pytest.mark.parametrize("xi", [-0.2, 0.0, 0.2])
def test_samples_exceed_return_levels_at_the_right_rate(xi):
    params = EVDParams.stationary(1.0, 0.5, xi)
    n = 1_000_000
    sample = gev_sample(params, n, np.random.default_rng(11))
    assert np.all(sample < support_bounds(params).upper)
    for p in (0.1, 0.01):
        rate = np.mean(sample > gev_return_level(p, params))
        assert abs(rate - p) <= 4.0 * math.sqrt(p * (1.0 - p) / n)
