"""Run metrics: waiting-time statistics, quality score, relative demand."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields

log = logging.getLogger(__name__)


def aswt(waits) -> float:
    """Root-mean-square waiting time over full trips (0 when there are none)."""
    n = len(waits)
    if n == 0:
        log.warning("no full trips recorded; ASWT defined as 0")
        return 0.0
    return math.sqrt(math.fsum(w * w for w in waits) / n)


def awt(waits) -> float:
    n = len(waits)
    return math.fsum(waits) / n if n else 0.0


def qc(aswt_s: float, net: float) -> float:
    return aswt_s * net


def rho(lam: float, M: float) -> float:
    if not M > 0:
        raise ValueError("maximum ridership must be positive")
    return lam / M


def improvement(base: float, x: float) -> float:
    """Percent reduction of ``x`` relative to ``base``; negative means growth."""
    if base == 0:
        return 0.0 if x == 0 else -math.inf
    return (base - x) / base * 100.0


@dataclass
class RunSummary:
    ASWT: float
    AWT: float
    NET: int
    ETM: float              # km
    QC: float
    served_groups: int
    lam: float
    rho: float
    J: int
    tag: str
    seed: int
    wall_time: float = 0.0

    def __post_init__(self):
        if self.ASWT + 1e-9 < self.AWT:
            raise ValueError(f"ASWT {self.ASWT} below AWT {self.AWT}")

    # wall time is excluded so identical runs give identical files
    CSV_FIELDS = ("J", "lam", "rho", "tag", "seed", "ASWT", "AWT", "NET", "ETM", "QC",
                  "served_groups")

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.CSV_FIELDS}

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]
