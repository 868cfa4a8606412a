import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from extreme_attribution.errors import EXIT_CONFIG, EXIT_PARSE
from extreme_attribution.main import main
from extreme_attribution.reports import read_fit_report

MANIFEST = """
seed = 21
start_year = 1951
members_actual = 4
members_counterfactual = 6
years_actual = 60
years_counterfactual = 60
event_probability = 0.1

[truth.actual]
beta = [0.0, 1.5]
sigma = 1.0
xi = -0.05

[truth.counterfactual]
beta = [0.0]
sigma = 1.0
xi = -0.05
"""

RUN_CONFIG = """
out = "results"

[data]
observation = "data/observation.csv"
actual = "data/actual.csv"
counterfactual = "data/counterfactual.csv"

[event]
year = 2010
probability = 0.1

[uncertainty]
methods = ["delta", "lrt_pc_only"]

[uncertainty.bootstrap]
replicates = 5

[sensitivity]
probabilities = [0.1, 0.05]
mode = "pc_only"

[diagnose]
mrl_points = 10
cdf_points = 20
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("study")
    (root / "manifest.toml").write_text(MANIFEST, encoding="utf-8")
    (root / "run.toml").write_text(RUN_CONFIG, encoding="utf-8")
    result = CliRunner().invoke(
        main, ["--out", str(root / "data"), "simulate", "--manifest", str(root / "manifest.toml")]
    )
    assert result.exit_code == 0, result.output
    return root


def _run(workspace: Path, *args: str):
    return CliRunner().invoke(main, ["--config", str(workspace / "run.toml"), *args])


def test_simulate_writes_the_study(workspace):
    data = workspace / "data"
    for name in ("observation", "actual", "counterfactual"):
        frame = pd.read_csv(data / f"{name}.csv")
        assert {"year", "member", "value"} <= set(frame.columns)
    summary = json.loads((data / "study.json").read_text(encoding="utf-8"))
    assert summary["seed"] == 21
    assert summary["event_year"] == 2010


def test_fit(workspace):
    result = _run(workspace, "fit", "--scenario", "actual")
    assert result.exit_code == 0, result.output
    out = workspace / "results"
    fit = read_fit_report(out / "fit_actual.json")
    assert fit.params.n_covariates == 1
    assert (out / "fit_actual.csv").exists()
    assert "# config:" in (out / "fit_actual.txt").read_text(encoding="utf-8")
    assert (out / "effective_config.json").exists()


def test_fit_stationary_override(workspace, tmp_path):
    result = _run(
        workspace, "--out", str(tmp_path), "fit", "--scenario", "actual", "--mode", "stationary"
    )
    assert result.exit_code == 0, result.output
    assert read_fit_report(tmp_path / "fit_actual.json").params.is_stationary


def test_attribute(workspace, tmp_path):
    result = _run(workspace, "--out", str(tmp_path), "attribute")
    assert result.exit_code == 0, result.output
    values = pd.read_csv(tmp_path / "attribution.csv").set_index("quantity")["value"]
    assert values["p_O"] == pytest.approx(0.1)
    assert values["log2_RR"] > 0
    assert (tmp_path / "fit_counterfactual.json").exists()


def test_uncertainty(workspace, tmp_path):
    result = _run(workspace, "--out", str(tmp_path), "uncertainty")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "uncertainty.csv").set_index("method")
    assert list(frame.index) == ["delta", "lrt_pc_only"]
    assert (frame["status"] == "ok").all()
    assert frame.loc["lrt_pc_only", "upper"] == float("inf")
    assert frame.loc["delta", "lower"] < frame.loc["delta", "estimate"]


def test_bootstrap_is_reproducible_from_the_seed(workspace, tmp_path):
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        result = _run(
            workspace, "--seed", "5", "--out", str(out), "uncertainty", "--method", "bootstrap"
        )
        assert result.exit_code == 0, result.output
        outputs.append((out / "uncertainty.csv").read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]


def test_sensitivity(workspace, tmp_path):
    result = _run(workspace, "--out", str(tmp_path), "sensitivity", "--p", "0.2", "--p", "0.1")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "sensitivity.csv")
    assert frame["p_A"].tolist() == [0.2, 0.1]
    assert "z_O" in frame.columns


def test_diagnose(workspace, tmp_path):
    result = _run(workspace, "--out", str(tmp_path), "diagnose")
    assert result.exit_code == 0, result.output
    for scenario in ("observation", "actual", "counterfactual"):
        assert len(pd.read_csv(tmp_path / f"mrl_{scenario}.csv")) == 10
        cdf = pd.read_csv(tmp_path / f"cdf_{scenario}.csv")
        assert cdf["cdf"].is_monotonic_increasing
    supports = pd.read_csv(tmp_path / "supports.csv")
    assert supports["series"].tolist() == ["observation", "actual", "counterfactual"]


def test_config_error_exit_code(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[event]\nprobability = 2.0\n", encoding="utf-8")
    result = CliRunner().invoke(main, ["--config", str(config), "attribute"])
    assert result.exit_code == EXIT_CONFIG


def test_missing_event_is_a_config_error(workspace, tmp_path):
    config = tmp_path / "run.toml"
    text = (workspace / "run.toml").read_text(encoding="utf-8")
    config.write_text(
        text.replace("[event]\nyear = 2010\nprobability = 0.1\n", "").replace(
            'data/', str(workspace / "data") + "/"
        ),
        encoding="utf-8",
    )
    result = CliRunner().invoke(main, ["--config", str(config), "--out", str(tmp_path), "attribute"])
    assert result.exit_code == EXIT_CONFIG


def test_parse_error_exit_code(workspace, tmp_path):
    broken = tmp_path / "actual.csv"
    broken.write_text("year,value\n2000,1.0\n2001,oops\n", encoding="utf-8")
    config = tmp_path / "run.toml"
    config.write_text(f'[data]\nactual = "{broken}"\n', encoding="utf-8")
    result = CliRunner().invoke(
        main, ["--config", str(config), "--out", str(tmp_path), "fit", "--scenario", "actual"]
    )
    assert result.exit_code == EXIT_PARSE
    assert ":3" in result.output


def test_usage_error_exit_code():
    result = CliRunner().invoke(main, ["fit"])
    assert result.exit_code == 2
