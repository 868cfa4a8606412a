from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import click

from extreme_attribution.data.series import Scenario
from extreme_attribution.errors import EXIT_UNCERTAINTY, EXIT_UNEXPECTED, AttributionError
from extreme_attribution.evd.fitting import CovariateMode
from extreme_attribution.logger import logging, set_level
from extreme_attribution.uncertainty.intervals import IntervalMethod

logger = logging.getLogger(__name__)


@dataclass
class CliState:
    config_path: Path | None
    seed: int | None
    threads: int | None
    out: Path | None

    def run_config(self):
        from extreme_attribution.config import apply_overrides, load_run_config

        config = load_run_config(self.config_path)
        return apply_overrides(config, seed=self.seed, threads=self.threads, out=self.out)


@contextmanager
def error_boundary(command: str) -> Iterator[None]:
    """Map library errors to exit codes."""
    ctx = click.get_current_context()
    try:
        yield
    except AttributionError as e:
        logger.error("%s failed: %s", command, e)
        click.echo(f"error: {e}", err=True)
        ctx.exit(e.exit_code)
    except click.exceptions.Exit:
        raise
    except Exception as e:
        logger.exception("Unexpected error in %s", command)
        click.echo(f"unexpected error: {e}", err=True)
        ctx.exit(EXIT_UNEXPECTED)


def prepare_series(config, scenario: Scenario):
    """Load one scenario series and apply the configured anomaly and smoothing steps."""
    from extreme_attribution.data.series import compute_anomalies, load_series
    from extreme_attribution.data.smoothing import smooth_series_covariate

    series = load_series(config.data.path_for(scenario), scenario)
    if config.data.reference_period is not None and scenario in config.data.anomaly_scenarios:
        series = compute_anomalies(series, *config.data.reference_period)
    if config.data.smooth_covariate and series.covariate is not None:
        series = smooth_series_covariate(series, config.smoother_spec())
    return series


def _emit(config, *tables) -> None:
    from extreme_attribution.config import effective_config_json
    from extreme_attribution.reports import render_text, write_json, write_table

    config_json = effective_config_json(config)
    for table in tables:
        write_table(table, config.out, config_json)
        click.echo(render_text(table))
    write_json(config.model_dump(mode="json"), config.out / "effective_config.json")


def _attribute(config):
    from extreme_attribution.analysis.attribution import run_attribution

    event = config.event_definition()
    observation = None
    if event.magnitude is not None:
        observation = prepare_series(config, Scenario.OBSERVATION)
    actual = prepare_series(config, Scenario.ACTUAL)
    counterfactual = prepare_series(config, Scenario.COUNTERFACTUAL)
    attr = run_attribution(
        observation,
        actual,
        counterfactual,
        event,
        config.fit_config(),
        observation_mode=config.fit.observation_mode,
        actual_mode=config.fit.actual_mode,
    )
    return attr, actual, counterfactual


def _fits_of(attr) -> dict:
    fits = {}
    if attr.observation_fit is not None:
        fits[Scenario.OBSERVATION.value] = attr.observation_fit
    fits[Scenario.ACTUAL.value] = attr.actual_fit
    fits[Scenario.COUNTERFACTUAL.value] = attr.counterfactual_fit
    return fits


@click.group("extreme-attribution")
@click.option(
    "--config",
    "-c",
    "config_path",
    help="Run configuration (TOML).",
    type=click.Path(exists=True, dir_okay=False, file_okay=True, path_type=Path),
    default=None,
)
@click.option(
    "--seed",
    help="Random seed. Overrides EXTREME_ATTRIBUTION_SEED and the config file.",
    type=int,
    default=None,
)
@click.option(
    "--threads",
    help="Worker processes for replicates. Overrides EXTREME_ATTRIBUTION_THREADS.",
    type=click.IntRange(min=1),
    default=None,
)
@click.option(
    "--out",
    "out_dir",
    help="Output directory for reports.",
    type=click.Path(dir_okay=True, file_okay=False, path_type=Path),
    default=None,
)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
@click.pass_context
def main(
    ctx: click.Context,
    config_path: Path | None,
    seed: int | None,
    threads: int | None,
    out_dir: Path | None,
    verbose: bool,
):
    """
    CLI for extreme event attribution with quantile bias correction.
    """
    if verbose:
        set_level("DEBUG")
    ctx.obj = CliState(config_path=config_path, seed=seed, threads=threads, out=out_dir)


@main.command("fit")
@click.option(
    "--scenario",
    "-s",
    help="Series to fit.",
    type=click.Choice([s.value for s in Scenario]),
    required=True,
)
@click.option(
    "--mode",
    help="Covariate mode. Defaults to the config's mode for the series.",
    type=click.Choice([m.value for m in CovariateMode]),
    default=None,
)
@click.pass_obj
def fit_cmd(state: CliState, scenario: str, mode: str | None):
    """
    Fit the point-process model to one series.
    """
    from extreme_attribution.evd.fitting import fit_pp
    from extreme_attribution.reports import fit_table, write_fit_report

    with error_boundary("fit"):
        config = state.run_config()
        scenario = Scenario(scenario)
        series = prepare_series(config, scenario)
        fit_mode = CovariateMode(mode) if mode else config.mode_for(scenario)
        result = fit_pp(series, config.fit_config(fit_mode))
        _emit(config, fit_table({scenario.value: result}, name=f"fit_{scenario.value}"))
        write_fit_report(result, config.out / f"fit_{scenario.value}.json")


@main.command("attribute")
@click.pass_obj
def attribute_cmd(state: CliState):
    """
    Estimate the bias-corrected risk ratio of the configured event.
    """
    from extreme_attribution.reports import attribution_table, fit_table, write_fit_report

    with error_boundary("attribute"):
        config = state.run_config()
        attr, _, _ = _attribute(config)
        fits = _fits_of(attr)
        _emit(config, fit_table(fits), attribution_table(attr))
        for label, fit in fits.items():
            write_fit_report(fit, config.out / f"fit_{label}.json")


@main.command("uncertainty")
@click.option(
    "--method",
    "methods",
    help="Interval method (repeatable). Defaults to the config's list.",
    type=click.Choice([m.value for m in IntervalMethod]),
    multiple=True,
)
@click.pass_obj
def uncertainty_cmd(state: CliState, methods: Sequence[str]):
    """
    Confidence intervals for log2 RR: delta method, bootstrap and likelihood-ratio bounds.
    """
    from extreme_attribution.reports import IntervalRow, interval_table
    from extreme_attribution.uncertainty.bootstrap import bootstrap_interval
    from extreme_attribution.uncertainty.delta import delta_interval
    from extreme_attribution.uncertainty.intervals import LRTMode
    from extreme_attribution.uncertainty.lrt import (
        LRTProblem,
        check_lrt_ordering,
        lrt_lower_bound,
    )

    with error_boundary("uncertainty"):
        config = state.run_config()
        attr, actual, counterfactual = _attribute(config)
        requested = [IntervalMethod(m) for m in methods] or list(config.uncertainty.methods)
        lrt_config = config.lrt_config()
        problem = None
        rows: list[IntervalRow] = []
        lrt_results = {}
        for method in requested:
            try:
                if method is IntervalMethod.DELTA:
                    rows.append(IntervalRow(method.value, delta_interval(attr, config.uncertainty.level)))
                elif method is IntervalMethod.BOOTSTRAP:
                    result = bootstrap_interval(
                        attr,
                        actual,
                        counterfactual,
                        config.bootstrap_config(),
                        config.fit_config(),
                        threads=config.threads,
                    )
                    status = "unreliable" if result.diagnostics["unreliable"] else "ok"
                    rows.append(
                        IntervalRow(method.value, result, status, result.diagnostics["summary"])
                    )
                else:
                    mode = LRTMode.JOINT if method is IntervalMethod.LRT_JOINT else LRTMode.PC_ONLY
                    if problem is None:
                        problem = LRTProblem.from_attribution(
                            attr, max_iterations=lrt_config.max_iterations
                        )
                    result = lrt_lower_bound(problem, mode, lrt_config)
                    lrt_results[mode] = result
                    rows.append(IntervalRow(method.value, result, note=f"mode={mode.value}"))
            except AttributionError as e:
                logger.warning("%s interval failed: %s", method, e)
                rows.append(IntervalRow(method.value, status=f"failed: {e}"))

        if len(lrt_results) == 2:
            ordered = check_lrt_ordering(lrt_results[LRTMode.JOINT], lrt_results[LRTMode.PC_ONLY])
            rows.append(
                IntervalRow(
                    "lrt_ordering",
                    status="ok" if ordered else "violated",
                    note="joint lower bound <= pc_only lower bound",
                )
            )
        _emit(config, interval_table(rows))
        if requested and all(row.result is None for row in rows if row.method != "lrt_ordering"):
            click.get_current_context().exit(EXIT_UNCERTAINTY)


@main.command("sensitivity")
@click.option(
    "--p",
    "probabilities",
    help="Event probability p_A (repeatable). Defaults to the config's grid.",
    type=click.FloatRange(min=0.0, max=1.0, min_open=True, max_open=True),
    multiple=True,
)
@click.pass_obj
def sensitivity_cmd(state: CliState, probabilities: Sequence[float]):
    """
    Risk ratio and its lower bound across event probabilities.
    """
    from extreme_attribution.analysis.sensitivity import sensitivity_sweep
    from extreme_attribution.reports import sensitivity_table

    with error_boundary("sensitivity"):
        config = state.run_config()
        observation = None
        if config.data.observation is not None:
            observation = prepare_series(config, Scenario.OBSERVATION)
        rows = sensitivity_sweep(
            observation,
            prepare_series(config, Scenario.ACTUAL),
            prepare_series(config, Scenario.COUNTERFACTUAL),
            list(probabilities) or config.sensitivity.probabilities,
            config.fit_config(config.fit.observation_mode),
            event_year=config.event.year if config.event else None,
            lrt_config=config.lrt_config(),
            mode=config.sensitivity.mode,
            actual_mode=config.fit.actual_mode,
            threads=config.threads,
        )
        _emit(config, sensitivity_table(rows))


@main.command("diagnose")
@click.pass_obj
def diagnose_cmd(state: CliState):
    """
    Plot data: mean residual life per series and fitted distribution functions.
    """
    from extreme_attribution.analysis.diagnostics import diagnose_series, supports_table

    with error_boundary("diagnose"):
        config = state.run_config()
        tables = []
        supports = []
        for scenario in Scenario:
            if getattr(config.data, scenario.value) is None:
                continue
            series = prepare_series(config, scenario)
            result = diagnose_series(
                series,
                config.fit_config(config.mode_for(scenario)),
                event_year=config.event.year if config.event else None,
                mrl_points=config.diagnose.mrl_points,
                cdf_points=config.diagnose.cdf_points,
            )
            tables += [result.mrl, result.cdf]
            supports.append(result.support)
        _emit(config, *tables, supports_table(supports))


@main.command("simulate")
@click.option(
    "--manifest",
    "-m",
    "manifest_path",
    help="Simulation manifest (TOML).",
    required=True,
    type=click.Path(exists=True, dir_okay=False, file_okay=True, path_type=Path),
)
@click.pass_obj
def simulate_cmd(state: CliState, manifest_path: Path):
    """
    Write a synthetic study drawn from known parameters.
    """
    from extreme_attribution.config import load_manifest
    from extreme_attribution.data.series import write_series
    from extreme_attribution.data.simulate import study_from_manifest, study_summary
    from extreme_attribution.reports import write_json

    with error_boundary("simulate"):
        config = state.run_config()
        manifest = load_manifest(manifest_path)
        seed = state.seed if state.seed is not None else manifest.seed
        study = study_from_manifest(manifest, seed)
        for series in (study.observation, study.actual, study.counterfactual):
            write_series(series, config.out / f"{series.scenario.value}.csv")
        write_json(study_summary(study, seed), config.out / "study.json")
        click.echo(f"true log2 RR: {study.true.log2_rr:.6g} (z_A {study.true.z_a:.6g})")


if __name__ == "__main__":
    main()
