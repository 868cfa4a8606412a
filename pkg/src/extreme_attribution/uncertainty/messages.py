import math
from dataclasses import dataclass


@dataclass
class ReplicateTask:
    index: int


@dataclass
class ReplicateOutcome:
    index: int
    log2_rr: float = math.nan
    z_a: float = math.nan
    p_c: float = math.nan
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def infinite(self) -> bool:
        return not self.failed and math.isinf(self.log2_rr)


@dataclass
class SweepTask:
    p_a: float
