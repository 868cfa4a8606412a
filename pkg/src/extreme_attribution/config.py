"""Run configuration and simulation manifests (TOML, validated with pydantic).

Values are layered: CLI flags override environment variables, which override the
config file, which overrides the defaults below.
"""

import os
import tomllib
from pathlib import Path
from typing import Annotated, Any, Self

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from extreme_attribution.analysis.attribution import EventDefinition
from extreme_attribution.analysis.sensitivity import DEFAULT_PROBABILITIES
from extreme_attribution.data.series import Scenario
from extreme_attribution.data.smoothing import EndpointPolicy, SmootherSpec, WeightRule
from extreme_attribution.errors import ConfigError, InvalidInputError
from extreme_attribution.evd.core import EVDParams
from extreme_attribution.evd.fitting import BlockMode, CovariateMode, FitConfig
from extreme_attribution.logger import logging
from extreme_attribution.uncertainty.intervals import (
    BootstrapConfig,
    IntervalMethod,
    LRTConfig,
    LRTMode,
)

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "EXTREME_ATTRIBUTION_THREADS"
SEED_ENV_VAR = "EXTREME_ATTRIBUTION_SEED"

Probability = Annotated[float, Field(gt=0.0, lt=1.0)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SmootherSection(_Section):
    window: PositiveInt = 13
    weight_rule: WeightRule = WeightRule.BINOMIAL
    endpoint: EndpointPolicy = EndpointPolicy.REFLECT


class DataSection(_Section):
    observation: Path | None = None
    actual: Path | None = None
    counterfactual: Path | None = None
    reference_period: tuple[int, int] | None = None
    # scenarios converted to anomalies over reference_period
    anomaly_scenarios: list[Scenario] = [Scenario.OBSERVATION, Scenario.ACTUAL]
    smooth_covariate: bool = False
    smoother: SmootherSection = SmootherSection()

    def path_for(self, scenario: Scenario) -> Path:
        path = getattr(self, scenario.value)
        if path is None:
            raise ConfigError(f"no [data] path configured for the {scenario} series")
        return path


class EventSection(_Section):
    year: int | None = None
    magnitude: float | None = None
    probability: Probability | None = None

    @model_validator(mode="after")
    def _one_definition(self) -> Self:
        if (self.magnitude is None) == (self.probability is None):
            raise ValueError("[event] needs exactly one of magnitude or probability")
        return self


class FitSection(_Section):
    threshold_quantile: Probability = 0.80
    observation_mode: CovariateMode = CovariateMode.AUTO
    actual_mode: CovariateMode = CovariateMode.AUTO
    block_mode: BlockMode = BlockMode.ENSEMBLE
    max_iterations: PositiveInt = 4000
    tolerance: Annotated[float, Field(gt=0.0)] = 1e-9
    min_exceedances: PositiveInt = 5


class BootstrapSection(_Section):
    replicates: Annotated[int, Field(ge=2)] = 500
    resample_members: bool = True
    resample_years: bool = True
    per_member_years: bool = False
    max_failure_fraction: Annotated[float, Field(ge=0.0, le=1.0)] = 0.20
    unreliable_fraction: Annotated[float, Field(ge=0.0, le=1.0)] = 0.10


class LRTSection(_Section):
    chisq_crit: Annotated[float, Field(gt=0.0)] = 3.841
    bracket_lower_log2: float = -10.0
    bracket_cap_log2: float = 60.0
    solver_tolerance: Annotated[float, Field(gt=0.0)] = 1e-3
    penalty: Annotated[float, Field(gt=0.0)] = 1e12
    scan_points: Annotated[int, Field(ge=2)] = 5


class UncertaintySection(_Section):
    methods: list[IntervalMethod] = list(IntervalMethod)
    level: Probability = 0.95
    bootstrap: BootstrapSection = BootstrapSection()
    lrt: LRTSection = LRTSection()


class SensitivitySection(_Section):
    probabilities: list[Probability] = list(DEFAULT_PROBABILITIES)
    mode: LRTMode = LRTMode.JOINT


class DiagnoseSection(_Section):
    mrl_points: Annotated[int, Field(ge=2)] = 50
    cdf_points: Annotated[int, Field(ge=2)] = 200


class RunConfig(_Section):
    seed: int = 0
    threads: PositiveInt = 1
    out: Path = Path("results")
    data: DataSection = DataSection()
    event: EventSection | None = None
    fit: FitSection = FitSection()
    uncertainty: UncertaintySection = UncertaintySection()
    sensitivity: SensitivitySection = SensitivitySection()
    diagnose: DiagnoseSection = DiagnoseSection()

    def fit_config(self, mode: CovariateMode = CovariateMode.AUTO) -> FitConfig:
        return FitConfig(
            threshold_quantile=self.fit.threshold_quantile,
            covariate_mode=mode,
            block_mode=self.fit.block_mode,
            max_iterations=self.fit.max_iterations,
            tolerance=self.fit.tolerance,
            min_exceedances=self.fit.min_exceedances,
        )

    def mode_for(self, scenario: Scenario) -> CovariateMode:
        if scenario is Scenario.OBSERVATION:
            return self.fit.observation_mode
        if scenario is Scenario.ACTUAL:
            return self.fit.actual_mode
        return CovariateMode.STATIONARY

    def event_definition(self) -> EventDefinition:
        if self.event is None:
            raise ConfigError("no [event] section configured")
        return EventDefinition(
            magnitude=self.event.magnitude,
            probability=self.event.probability,
            event_year=self.event.year,
        )

    def bootstrap_config(self) -> BootstrapConfig:
        section = self.uncertainty.bootstrap
        return BootstrapConfig(
            replicates=section.replicates,
            resample_members=section.resample_members,
            resample_years=section.resample_years,
            per_member_years=section.per_member_years,
            seed=self.seed,
            level=self.uncertainty.level,
            max_failure_fraction=section.max_failure_fraction,
            unreliable_fraction=section.unreliable_fraction,
        )

    def lrt_config(self) -> LRTConfig:
        return LRTConfig(**self.uncertainty.lrt.model_dump())

    def smoother_spec(self) -> SmootherSpec:
        return SmootherSpec(**self.data.smoother.model_dump())


class ParamsSection(_Section):
    beta: list[float] = Field(min_length=1)
    sigma: Annotated[float, Field(gt=0.0)]
    xi: float

    def to_params(self) -> EVDParams:
        return EVDParams(tuple(self.beta), self.sigma, self.xi)


class CovariatePathSection(_Section):
    start: float = 0.0
    end: float = 1.0
    power: Annotated[float, Field(gt=0.0)] = 1.0


class TruthSection(_Section):
    actual: ParamsSection
    counterfactual: ParamsSection
    observation: ParamsSection | None = None


class SimulationManifest(_Section):
    seed: int = 0
    start_year: int = 1901
    members_actual: PositiveInt = 5
    members_counterfactual: PositiveInt = 12
    years_actual: Annotated[int, Field(ge=2)] = 112
    years_counterfactual: Annotated[int, Field(ge=2)] = 100
    event_probability: Probability = 0.032
    event_year: int | None = None
    block_mode: BlockMode = BlockMode.ENSEMBLE
    covariate: CovariatePathSection = CovariatePathSection()
    truth: TruthSection


def _read_toml(path: Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e


def _resolve(path: Path | None, base: Path) -> Path | None:
    if path is None or path.is_absolute():
        return path
    return base / path


def load_run_config(path: Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    raw = _read_toml(path)
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    base = path.parent
    data = config.data.model_copy(
        update={
            scenario.value: _resolve(getattr(config.data, scenario.value), base)
            for scenario in Scenario
        }
    )
    config = config.model_copy(update={"data": data, "out": _resolve(config.out, base)})
    logger.info("Loaded run config from %s", path)
    return config


def _env_int(name: str) -> int | None:
    value = os.environ.get(name)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"environment variable {name} must be an integer, got {value!r}") from e


def apply_overrides(
    config: RunConfig,
    *,
    seed: int | None = None,
    threads: int | None = None,
    out: Path | None = None,
) -> RunConfig:
    """Layer environment variables, then CLI flags, over a loaded config."""
    update: dict[str, Any] = {}
    for key, flag, env_var in (("seed", seed, SEED_ENV_VAR), ("threads", threads, THREADS_ENV_VAR)):
        value = flag if flag is not None else _env_int(env_var)
        if value is not None:
            update[key] = value
    if out is not None:
        update["out"] = out
    try:
        return RunConfig.model_validate({**config.model_dump(), **update})
    except ValidationError as e:
        raise ConfigError(f"invalid override: {e}") from e


def load_manifest(path: Path) -> SimulationManifest:
    path = Path(path)
    raw = _read_toml(path)
    try:
        manifest = SimulationManifest.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    try:
        manifest.truth.actual.to_params()
        manifest.truth.counterfactual.to_params()
    except InvalidInputError as e:
        raise ConfigError(f"{path}: {e}") from e
    return manifest


def effective_config_json(config: RunConfig) -> str:
    return config.model_dump_json()
