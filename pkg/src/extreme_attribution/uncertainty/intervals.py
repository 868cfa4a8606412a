"""Interval results and the settings of the three interval methods."""

import math
from dataclasses import dataclass, field
from enum import StrEnum

from scipy import stats

from extreme_attribution.errors import InvalidInputError


class IntervalMethod(StrEnum):
    DELTA = "delta"
    BOOTSTRAP = "bootstrap"
    LRT_PC_ONLY = "lrt_pc_only"
    LRT_JOINT = "lrt_joint"


class LRTMode(StrEnum):
    # only the counterfactual scale and shape are re-estimated under the constraint
    PC_ONLY = "pc_only"
    # actual and counterfactual parameters are re-estimated together
    JOINT = "joint"

    @property
    def method(self) -> IntervalMethod:
        return IntervalMethod.LRT_JOINT if self is LRTMode.JOINT else IntervalMethod.LRT_PC_ONLY


@dataclass(frozen=True)
class IntervalResult:
    """Interval for log2 RR. LRT bounds are one-sided, with ``upper = inf``."""

    method: IntervalMethod
    level: float
    lower: float
    upper: float
    estimate: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def rr_lower(self) -> float:
        return 2.0**self.lower if self.lower < 1024 else math.inf

    @property
    def rr_upper(self) -> float:
        return 2.0**self.upper if self.upper < 1024 else math.inf

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 500
    resample_members: bool = True
    resample_years: bool = True
    # draw a separate year multiset for every member instead of one per scenario
    per_member_years: bool = False
    seed: int = 0
    level: float = 0.95
    max_failure_fraction: float = 0.20
    unreliable_fraction: float = 0.10

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidInputError(f"need at least 2 bootstrap replicates, got {self.replicates}")
        if not 0.0 < self.level < 1.0:
            raise InvalidInputError(f"confidence level must lie in (0, 1), got {self.level}")


@dataclass(frozen=True)
class LRTConfig:
    chisq_crit: float = 3.841
    bracket_lower_log2: float = -10.0
    bracket_cap_log2: float = 60.0
    solver_tolerance: float = 1e-3
    penalty: float = 1e12
    consistency_tolerance: float = 1e-6
    scan_points: int = 5
    scan_tolerance: float = 1e-3
    max_iterations: int = 6000

    def __post_init__(self):
        if not self.chisq_crit > 0:
            raise InvalidInputError(f"critical value must be positive, got {self.chisq_crit}")
        if not self.bracket_lower_log2 < self.bracket_cap_log2:
            raise InvalidInputError("LRT bracket is empty")
        if self.scan_points < 2:
            raise InvalidInputError("need at least two scan points")

    @classmethod
    def from_level(cls, level: float, **kwargs) -> "LRTConfig":
        return cls(chisq_crit=float(stats.chi2.ppf(level, df=1)), **kwargs)

    @property
    def level(self) -> float:
        return float(stats.chi2.cdf(self.chisq_crit, df=1))
