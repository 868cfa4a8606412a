import math

import pytest

from extreme_attribution.analysis.sensitivity import sensitivity_sweep
from extreme_attribution.errors import InvalidInputError
from extreme_attribution.uncertainty.intervals import LRTMode


@pytest.fixture(scope="module")
def rows(small_study):
    return sensitivity_sweep(
        small_study.observation,
        small_study.actual,
        small_study.counterfactual,
        [0.05, 0.2, 0.1],
        event_year=small_study.event_year,
        mode=LRTMode.PC_ONLY,
    )


def test_rows_are_sorted_by_decreasing_probability(rows):
    assert [row.p_a for row in rows] == [0.2, 0.1, 0.05]


def test_rarer_events_sit_higher(rows):
    levels = [row.z_a for row in rows]
    assert levels == sorted(levels)
    observed = [row.z_o for row in rows]
    assert observed == sorted(observed)


def test_each_row_has_a_bound_below_its_estimate(rows):
    for row in rows:
        assert row.status == "ok"
        assert math.isfinite(row.log2_rr)
        assert row.lower_log2 < row.log2_rr
        assert row.rr_lower == pytest.approx(2.0**row.lower_log2)
        assert row.p_c == pytest.approx(row.p_a / 2.0**row.log2_rr)


def test_single_probability_matches_the_grid(small_study, rows):
    (single,) = sensitivity_sweep(
        None,
        small_study.actual,
        small_study.counterfactual,
        [0.1],
        event_year=small_study.event_year,
        mode=LRTMode.PC_ONLY,
    )
    assert single.z_o is None
    assert single.log2_rr == pytest.approx(rows[1].log2_rr)
    assert single.lower_log2 == pytest.approx(rows[1].lower_log2, abs=1e-6)


def test_parallel_sweep_matches_serial(small_study, rows):
    parallel = sensitivity_sweep(
        small_study.observation,
        small_study.actual,
        small_study.counterfactual,
        [0.05, 0.2, 0.1],
        event_year=small_study.event_year,
        mode=LRTMode.PC_ONLY,
        threads=2,
    )
    assert [row.lower_log2 for row in parallel] == [row.lower_log2 for row in rows]


@pytest.mark.parametrize("p_values", [[], [0.1, 1.0], [0.0]])
def test_invalid_probabilities(small_study, p_values):
    with pytest.raises(InvalidInputError):
        sensitivity_sweep(
            None,
            small_study.actual,
            small_study.counterfactual,
            p_values,
            event_year=small_study.event_year,
        )
