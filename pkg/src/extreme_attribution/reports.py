"""Report tables (aligned text and CSV) and JSON fit reports."""

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from extreme_attribution.analysis.attribution import AttributionResult
from extreme_attribution.analysis.sensitivity import SensitivityRow
from extreme_attribution.data.series import Scenario
from extreme_attribution.errors import InvalidInputError
from extreme_attribution.evd.core import EVDParams
from extreme_attribution.evd.fitting import CovariateMode, FitResult, MRLTable
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import IntervalResult

logger = logging.getLogger(__name__)

FIT_REPORT_VERSION = 1


@dataclass
class Table:
    name: str
    title: str
    frame: pd.DataFrame


def _text_float(value: float) -> str:
    return f"{value:.6g}"


def render_text(table: Table, config_json: str | None = None) -> str:
    lines = [f"# {table.title}"]
    if config_json is not None:
        lines.append(f"# config: {config_json}")
    if table.frame.empty:
        lines.append("(no rows)")
    else:
        lines.append(table.frame.to_string(index=False, float_format=_text_float))
    return "\n".join(lines) + "\n"


def write_table(table: Table, out_dir: Path, config_json: str | None = None) -> tuple[Path, Path]:
    """Write ``<name>.txt`` (aligned, with the config line) and ``<name>.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / f"{table.name}.txt"
    csv_path = out_dir / f"{table.name}.csv"
    text_path.write_text(render_text(table, config_json), encoding="utf-8")
    table.frame.to_csv(csv_path, index=False)
    logger.info("Wrote %s and %s", text_path, csv_path)
    return text_path, csv_path


def fit_table(fits: Mapping[str, FitResult], name: str = "fits") -> Table:
    """Parameter estimates, one row per fit, with as many location columns as needed."""
    n_locations = max(len(fit.params.beta) for fit in fits.values())
    rows = []
    for label, fit in fits.items():
        row: dict[str, object] = {"series": label, "mode": str(fit.mode)}
        for k in range(n_locations):
            row[f"beta_{k}"] = fit.params.beta[k] if k < len(fit.params.beta) else math.nan
        row.update(
            sigma=fit.params.sigma,
            xi=fit.params.xi,
            threshold=fit.threshold,
            n_exceedances=fit.n_exceedances,
            loglik=fit.loglik,
            aic=fit.aic,
            converged=fit.converged,
        )
        rows.append(row)
    return Table(name, "Point-process parameter estimates", pd.DataFrame(rows))


def attribution_table(attr: AttributionResult) -> Table:
    rows = [
        ("p_O", attr.p_o),
        ("z_A", attr.z_a),
        ("p_C", attr.p_c),
        ("log2_RR", attr.log2_rr),
        ("RR", attr.rr),
        ("FAR", attr.far),
    ]
    rows += [(f"x_event_{k + 1}", x) for k, x in enumerate(attr.covariate_at_event)]
    if attr.unadjusted is not None:
        rows += [
            ("unadjusted_p_A", attr.unadjusted.p_a),
            ("unadjusted_p_C", attr.unadjusted.p_c),
            ("unadjusted_log2_RR", attr.unadjusted.log2_rr),
            ("unadjusted_RR", attr.unadjusted.rr),
        ]
    frame = pd.DataFrame(rows, columns=["quantity", "value"])
    return Table("attribution", "Bias-corrected risk ratio", frame)


@dataclass(frozen=True)
class IntervalRow:
    method: str
    result: IntervalResult | None = None
    status: str = "ok"
    note: str = ""


def interval_table(rows: Sequence[IntervalRow]) -> Table:
    records = []
    for row in rows:
        result = row.result
        records.append(
            {
                "method": row.method,
                "level": result.level if result else math.nan,
                "estimate": result.estimate if result else math.nan,
                "lower": result.lower if result else math.nan,
                "upper": result.upper if result else math.nan,
                "rr_lower": result.rr_lower if result else math.nan,
                "rr_upper": result.rr_upper if result else math.nan,
                "status": row.status,
                "note": row.note,
            }
        )
    return Table("uncertainty", "Intervals for log2 RR", pd.DataFrame(records))


def sensitivity_table(rows: Sequence[SensitivityRow]) -> Table:
    records = []
    for row in rows:
        record: dict[str, object] = {"p_A": row.p_a}
        if row.z_o is not None:
            record["z_O"] = row.z_o
        record.update(
            z_A=row.z_a,
            p_C=row.p_c,
            log2_RR=row.log2_rr,
            lower_log2=row.lower_log2,
            upper_log2=math.inf,
            RR_lower=row.rr_lower,
            status=row.status,
        )
        records.append(record)
    return Table("sensitivity", "Sensitivity to the event definition", pd.DataFrame(records))


def mrl_table(name: str, table: MRLTable) -> Table:
    frame = pd.DataFrame(
        {
            "threshold": [r.threshold for r in table.rows],
            "mean_excess": [r.mean_excess for r in table.rows],
            "std_error": [r.std_error for r in table.rows],
            "count": [r.count for r in table.rows],
        }
    )
    return Table(name, "Mean residual life", frame)


def _jsonable(value: object) -> object:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, str | int | float | bool) or value is None:
        return value
    return str(value)


def fit_report(fit: FitResult) -> dict:
    return {
        "version": FIT_REPORT_VERSION,
        "scenario": str(fit.scenario) if fit.scenario is not None else None,
        "mode": str(fit.mode),
        "parameters": {
            "beta": list(fit.params.beta),
            "sigma": fit.params.sigma,
            "xi": fit.params.xi,
        },
        "parameter_names": fit.parameter_names,
        "covariance": fit.covariance.tolist(),
        "loglik": fit.loglik,
        "aic": fit.aic,
        "threshold": fit.threshold,
        "n_exceedances": fit.n_exceedances,
        "n_total": fit.n_total,
        "n_per_year": fit.n_per_year,
        "converged": fit.converged,
        "data_hash": fit.data_hash,
        "diagnostics": _jsonable(fit.diagnostics),
    }


def write_fit_report(fit: FitResult, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(fit_report(fit), indent=2) + "\n", encoding="utf-8")


def read_fit_report(path: Path) -> FitResult:
    """Rebuild a FitResult from ``write_fit_report`` output (without the data)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        params = raw["parameters"]
        return FitResult(
            params=EVDParams(tuple(params["beta"]), params["sigma"], params["xi"]),
            loglik=float(raw["loglik"]),
            covariance=np.array(raw["covariance"], dtype=float),
            threshold=float(raw["threshold"]),
            n_exceedances=int(raw["n_exceedances"]),
            aic=float(raw["aic"]),
            converged=bool(raw["converged"]),
            mode=CovariateMode(raw["mode"]),
            n_total=int(raw["n_total"]),
            n_per_year=int(raw["n_per_year"]),
            data_hash=raw["data_hash"],
            diagnostics=raw.get("diagnostics", {}),
            scenario=Scenario(raw["scenario"]) if raw.get("scenario") else None,
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"cannot read fit report {path}: {e}") from e


def write_json(payload: dict, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
