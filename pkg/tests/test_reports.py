import json
import math

import numpy as np
import pandas as pd
import pytest

from conftest import ACTUAL_COVARIATE, ACTUAL_PARAMS, COUNTERFACTUAL_PARAMS, EVENT_YEAR, make_fit
from extreme_attribution.analysis.attribution import EventDefinition, attribute_fits
from extreme_attribution.analysis.sensitivity import SensitivityRow
from extreme_attribution.data.series import Scenario
from extreme_attribution.errors import InvalidInputError
from extreme_attribution.evd.fitting import fit_pp
from extreme_attribution.reports import (
    IntervalRow,
    attribution_table,
    fit_table,
    interval_table,
    read_fit_report,
    render_text,
    sensitivity_table,
    write_fit_report,
    write_json,
    write_table,
)
from extreme_attribution.uncertainty.intervals import IntervalMethod, IntervalResult


def test_stationary_fit_table_has_one_location_column():
    table = fit_table({"counterfactual": make_fit(COUNTERFACTUAL_PARAMS)})
    assert [c for c in table.frame.columns if c.startswith("beta_")] == ["beta_0"]


def test_mixed_fit_table_pads_missing_slopes():
    table = fit_table(
        {
            "actual": make_fit(ACTUAL_PARAMS, covariate=ACTUAL_COVARIATE),
            "counterfactual": make_fit(COUNTERFACTUAL_PARAMS),
        }
    )
    frame = table.frame.set_index("series")
    assert frame.loc["actual", "beta_1"] == pytest.approx(1.382)
    assert math.isnan(frame.loc["counterfactual", "beta_1"])
    assert frame.loc["counterfactual", "mode"] == "stationary"


def test_attribution_table_rows():
    attr = attribute_fits(
        make_fit(ACTUAL_PARAMS, covariate=ACTUAL_COVARIATE),
        make_fit(COUNTERFACTUAL_PARAMS),
        EventDefinition(probability=0.032, event_year=EVENT_YEAR),
    )
    values = attribution_table(attr).frame.set_index("quantity")["value"]
    assert values["p_O"] == 0.032
    assert values["x_event_1"] == ACTUAL_COVARIATE
    assert values["log2_RR"] == attr.log2_rr
    assert "unadjusted_RR" not in values.index


def test_text_rendering_embeds_the_config():
    table = fit_table({"counterfactual": make_fit(COUNTERFACTUAL_PARAMS)})
    text = render_text(table, '{"seed":1}')
    lines = text.splitlines()
    assert lines[0] == "# Point-process parameter estimates"
    assert lines[1] == '# config: {"seed":1}'
    assert "1.415" in text


def test_interval_table_keeps_failed_methods(tmp_path):
    lrt = IntervalResult(IntervalMethod.LRT_JOINT, 0.95, 3.5, math.inf, 5.0)
    table = interval_table(
        [IntervalRow("lrt_joint", lrt), IntervalRow("delta", status="failed: RR is infinite")]
    )
    _, csv_path = write_table(table, tmp_path, "{}")
    frame = pd.read_csv(csv_path)
    assert frame["upper"].iloc[0] == math.inf
    assert frame["rr_lower"].iloc[0] == pytest.approx(2.0**3.5)
    assert math.isnan(frame["lower"].iloc[1])
    assert frame["status"].iloc[1] == "failed: RR is infinite"
    assert (tmp_path / "uncertainty.txt").read_text(encoding="utf-8").startswith("# Intervals")


def test_sensitivity_table_columns():
    rows = [
        SensitivityRow(p_a=0.1, z_a=4.0, p_c=0.01, log2_rr=3.3, lower_log2=2.0, z_o=2.0),
        SensitivityRow(p_a=0.05, z_a=4.5, p_c=0.0, log2_rr=math.inf, lower_log2=4.0, z_o=2.3),
    ]
    frame = sensitivity_table(rows).frame
    assert list(frame.columns) == [
        "p_A", "z_O", "z_A", "p_C", "log2_RR", "lower_log2", "upper_log2", "RR_lower", "status",
    ]
    assert frame["log2_RR"].iloc[1] == math.inf
    assert np.all(frame["upper_log2"] == math.inf)


def test_fit_report_round_trip(tmp_path, small_study):
    fit = fit_pp(small_study.actual)
    path = tmp_path / "fit_actual.json"
    write_fit_report(fit, path)
    restored = read_fit_report(path)
    assert restored.params == fit.params
    np.testing.assert_array_equal(restored.covariance, fit.covariance)
    assert restored.scenario is Scenario.ACTUAL
    assert restored.mode == fit.mode
    assert restored.data_hash == fit.data_hash
    assert restored.diagnostics == fit.diagnostics
    assert restored.exceedances is None
    assert json.loads(path.read_text(encoding="utf-8"))["parameter_names"] == [
        "beta_0", "beta_1", "sigma", "xi",
    ]


@pytest.mark.parametrize("content", ["not json", "{}", '{"parameters": {"beta": []}}'])
def test_unreadable_fit_report(tmp_path, content):
    path = tmp_path / "fit.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(InvalidInputError):
        read_fit_report(path)


def test_write_json_converts_numpy(tmp_path):
    path = tmp_path / "out" / "summary.json"
    write_json({"values": np.array([1.0, 2.0]), "count": np.int64(3), "mode": Scenario.ACTUAL}, path)
    assert json.loads(path.read_text(encoding="utf-8")) == {
        "count": 3,
        "mode": "actual",
        "values": [1.0, 2.0],
    }
