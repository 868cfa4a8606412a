"""Repeated-sampling checks. Each takes minutes; run with ``pytest -m slow``."""

import itertools
import math

import numpy as np
import pytest

from extreme_attribution.analysis.attribution import EventDefinition, attribute_fits, run_attribution
from extreme_attribution.data.simulate import StudyTruth, covariate_path, simulate_study
from extreme_attribution.errors import AttributionError
from extreme_attribution.evd.core import (
    EVDParams,
    block_maximum_params,
    gev_exceedance_prob,
    gev_sample,
    support_bounds,
)
from extreme_attribution.evd.fitting import (
    CovariateMode,
    FitConfig,
    compare_aic,
    fit_matrix,
    fit_pp,
)
from extreme_attribution.uncertainty.bootstrap import bootstrap_interval
from extreme_attribution.uncertainty.delta import delta_interval
from extreme_attribution.uncertainty.intervals import BootstrapConfig, LRTMode
from extreme_attribution.uncertainty.lrt import LRTProblem, lrt_lower_bound

pytestmark = pytest.mark.slow

N_STUDIES = 200


def test_wald_intervals_cover_the_block_parameters():
    truth = EVDParams.stationary(0.0, 1.0, -0.1)
    expected = block_maximum_params(truth, 12).to_vector()
    hits = np.zeros(3)
    for seed in range(N_STUDIES):
        values = gev_sample(truth, (12, 100), np.random.default_rng(seed))
        fit = fit_matrix(values, None, FitConfig(), CovariateMode.STATIONARY)
        z = np.abs(fit.params.to_vector() - expected) / fit.standard_errors
        hits += z <= 1.959964
    coverage = hits / N_STUDIES
    assert np.all(coverage >= 0.88), coverage
    assert np.all(coverage <= 0.99), coverage


def test_standard_errors_shrink_with_the_square_root_of_n():
    truth = EVDParams.stationary(0.0, 1.0, -0.1)
    errors = []
    for years in (50, 200, 800):
        runs = [
            fit_matrix(
                gev_sample(truth, (10, years), np.random.default_rng(seed)),
                None,
                FitConfig(),
                CovariateMode.STATIONARY,
            ).standard_errors
            for seed in range(10)
        ]
        errors.append(np.mean(runs, axis=0))
    for small, large in itertools.pairwise(errors):
        ratio = large / small
        assert np.all((ratio >= 0.4) & (ratio <= 0.6)), ratio


def test_aic_prefers_the_stationary_model_without_a_trend():
    truth = EVDParams.stationary(0.0, 1.0, -0.1)
    covariate = np.broadcast_to(covariate_path(100), (12, 100))
    stationary_wins = 0
    for seed in range(100):
        values = gev_sample(truth, (12, 100), np.random.default_rng(seed))
        stationary = fit_matrix(values, None, FitConfig(), CovariateMode.STATIONARY)
        linear = fit_matrix(values, covariate, FitConfig(), CovariateMode.LINEAR)
        stationary_wins += compare_aic(stationary, linear).preferred is CovariateMode.STATIONARY
    assert stationary_wins > 50


def test_joint_lrt_bound_covers_the_true_risk_ratio():
    truth = StudyTruth(
        actual=EVDParams((0.0, 3.0), 1.0, 0.0),
        counterfactual=EVDParams.stationary(0.0, 1.0, 0.0),
    )
    covered = 0
    for seed in range(N_STUDIES):
        study = simulate_study(
            truth, members_actual=5, members_counterfactual=12, n_years_counterfactual=100,
            seed=seed, p_a=0.05,
        )
        if seed == 0:
            assert 1e-6 <= study.true.p_c <= 1e-2
        event = EventDefinition(probability=study.p_a, event_year=study.event_year)
        try:
            attr = run_attribution(None, study.actual, study.counterfactual, event)
            bound = lrt_lower_bound(LRTProblem.from_attribution(attr), LRTMode.JOINT)
        except AttributionError:
            continue
        covered += bound.lower <= study.true.log2_rr
    assert covered / N_STUDIES >= 0.90


def test_bounds_stay_stable_across_the_counterfactual_upper_bound():
    actual_values = gev_sample(
        EVDParams.stationary(1.0, 1.0, -0.1), (5, 100), np.random.default_rng(11)
    )
    actual_fit = fit_matrix(actual_values, None, FitConfig(), CovariateMode.STATIONARY)
    cf_values = gev_sample(
        EVDParams.stationary(0.0, 1.0, -0.2), (12, 100), np.random.default_rng(12)
    )
    cf_fit = fit_matrix(cf_values, None, FitConfig(), CovariateMode.STATIONARY)
    upper = support_bounds(cf_fit.params).upper
    sigma = cf_fit.params.sigma

    estimates, bounds = [], []
    for offset in (-0.1, -0.05, 0.02, 0.05, 0.1):
        p_a = gev_exceedance_prob(upper + offset * sigma, actual_fit.params)
        attr = attribute_fits(actual_fit, cf_fit, EventDefinition(probability=p_a))
        estimates.append(attr.log2_rr)
        bounds.append(lrt_lower_bound(LRTProblem.from_attribution(attr), LRTMode.JOINT).lower)

    assert any(math.isinf(e) for e in estimates)
    assert any(math.isfinite(e) for e in estimates)
    assert all(math.isfinite(b) for b in bounds)
    assert max(bounds) - min(bounds) < 1.5


def test_bootstrap_and_delta_agree_when_the_model_is_well_behaved():
    truth = StudyTruth(
        actual=EVDParams.stationary(0.5, 1.0, -0.1),
        counterfactual=EVDParams.stationary(0.0, 1.0, -0.1),
    )
    study = simulate_study(
        truth, members_actual=10, members_counterfactual=10, n_years_actual=100,
        n_years_counterfactual=100, seed=3, p_a=0.05,
    )
    event = EventDefinition(probability=study.p_a)
    stationary = FitConfig(covariate_mode=CovariateMode.STATIONARY)
    attr = attribute_fits(fit_pp(study.actual, stationary), fit_pp(study.counterfactual), event)

    delta = delta_interval(attr)
    boot = bootstrap_interval(
        attr, study.actual, study.counterfactual, BootstrapConfig(replicates=500, seed=1),
        stationary,
        threads=4,
    )
    delta_half = (delta.upper - delta.lower) / 2.0
    boot_half = (boot.upper - boot.lower) / 2.0
    assert abs(boot_half - delta_half) <= 0.2 * delta_half
