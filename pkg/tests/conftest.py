import numpy as np
import pytest

from extreme_attribution.analysis.attribution import EventDefinition, run_attribution
from extreme_attribution.data.simulate import StudyTruth, simulate_study
from extreme_attribution.evd.core import EVDParams
from extreme_attribution.evd.fitting import CovariateMode, FitResult

# Point-process fits for the 2011 Texas summer temperature event
OBSERVATION_PARAMS = EVDParams((-0.802, 0.404), 1.250, -0.239)
ACTUAL_PARAMS = EVDParams((1.263, 1.382), 0.926, -0.197)
COUNTERFACTUAL_PARAMS = EVDParams.stationary(1.415, 0.638, -0.179)
EVENT_YEAR = 2011
EVENT_MAGNITUDE = 2.467
EVENT_PROBABILITY = 0.032
# covariate values that reproduce p_O = 0.032 and z_A = 4.842 with these parameters
OBSERVATION_COVARIATE = 0.8545
ACTUAL_COVARIATE = 0.9205


def make_fit(
    params: EVDParams,
    *,
    covariate: float | None = None,
    event_year: int = EVENT_YEAR,
    covariance: np.ndarray | None = None,
    converged: bool = True,
    aic: float = 0.0,
    data_hash: str = "",
    threshold: float = 1.0,
) -> FitResult:
    """A FitResult with given parameters, for tests that do not need the data."""
    n = len(params.beta) + 2
    years = np.array([event_year - 1, event_year])
    return FitResult(
        params=params,
        loglik=0.0,
        covariance=np.zeros((n, n)) if covariance is None else covariance,
        threshold=threshold,
        n_exceedances=20,
        aic=aic,
        converged=converged,
        mode=CovariateMode.STATIONARY if params.is_stationary else CovariateMode.LINEAR,
        n_total=100,
        n_per_year=1,
        data_hash=data_hash,
        years=years,
        covariate=None if covariate is None else np.array([0.0, covariate]),
    )


@pytest.fixture
def texas_fits() -> dict[str, FitResult]:
    return {
        "observation": make_fit(OBSERVATION_PARAMS, covariate=OBSERVATION_COVARIATE),
        "actual": make_fit(ACTUAL_PARAMS, covariate=ACTUAL_COVARIATE),
        "counterfactual": make_fit(COUNTERFACTUAL_PARAMS),
    }


@pytest.fixture(scope="session")
def study_truth() -> StudyTruth:
    return StudyTruth(
        actual=EVDParams((0.0, 1.5), 1.0, -0.05),
        counterfactual=EVDParams.stationary(0.0, 1.0, -0.05),
    )


@pytest.fixture(scope="session")
def small_study(study_truth):
    """A small synthetic study with a finite risk ratio."""
    return simulate_study(
        study_truth,
        members_actual=5,
        members_counterfactual=8,
        n_years_actual=60,
        n_years_counterfactual=60,
        start_year=1951,
        seed=7,
        p_a=0.1,
    )


@pytest.fixture(scope="session")
def study_attribution(small_study):
    event = EventDefinition(probability=small_study.p_a, event_year=small_study.event_year)
    return run_attribution(None, small_study.actual, small_study.counterfactual, event)
