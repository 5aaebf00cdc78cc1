"""Passenger demand: ODM, per-station rates, group sampling, dwell times, PI history."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0

TIER_LOW = 2.0 / 3.0
TIER_MID = 1.0
TIER_HIGH = 4.0 / 3.0

# seed that fixes the "randomly selected and then fixed" tier permutation
TIER_SEED = 2016


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class Triangular:
    low: float
    mode: float
    high: float

    def __post_init__(self):
        if not (self.low <= self.mode <= self.high):
            raise DemandError(f"triangular needs low <= mode <= high, got {self}")
        if self.low < 0:
            raise DemandError("service times must be nonnegative")

    @property
    def mean(self) -> float:
        return (self.low + self.mode + self.high) / 3.0


DEFAULT_BOARDING = Triangular(4.0, 8.0, 20.0)
DEFAULT_ALIGHTING = Triangular(4.0, 6.0, 15.0)


# --------------------------------------------------------------------------
# origin-destination matrices


class OdmMatrix:
    """Row-stochastic N x N matrix with a zero diagonal."""

    def __init__(self, P):
        P = np.asarray(P, dtype=float)
        n = P.shape[0]
        if P.ndim != 2 or P.shape != (n, n):
            raise DemandError("ODM must be square")
        if np.any(P < 0):
            raise DemandError("ODM entries must be nonnegative")
        if np.any(np.diag(P) != 0):
            raise DemandError("ODM diagonal must be zero")
        if not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise DemandError("ODM rows must sum to 1")
        self.P = P
        self._cum = np.cumsum(P, axis=1)
        self._last = [int(np.flatnonzero(row)[-1]) for row in P]

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def column_sums(self) -> np.ndarray:
        return self.P.sum(axis=0)

    def draw(self, origin: int, u: float) -> int:
        j = int(np.searchsorted(self._cum[origin], u, side="right"))
        return min(j, self._last[origin])


def normalize_odm(raw) -> OdmMatrix:
    """Zero the diagonal, then divide every row by its sum."""
    M = np.array(raw, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DemandError("ODM must be square")
    if np.any(M < 0):
        raise DemandError("raw ODM entries must be nonnegative")
    np.fill_diagonal(M, 0.0)
    sums = M.sum(axis=1)
    if np.any(sums <= 0):
        bad = [int(i) for i in np.flatnonzero(sums <= 0)]
        raise DemandError(f"rows {bad} have no positive off-diagonal entry")
    return OdmMatrix(M / sums[:, None])


def uniform_odm(n: int) -> OdmMatrix:
    return normalize_odm(np.ones((n, n)))


def random_raw(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).random((n, n))


def random_odm(n: int, seed: int) -> OdmMatrix:
    return normalize_odm(random_raw(n, seed))


def odm2(n: int, seed: int) -> OdmMatrix:
    """Random ODM with odd-numbered (1-based) destination columns zeroed."""
    raw = random_raw(n, seed)
    raw[:, 0::2] = 0.0
    return normalize_odm(raw)


def odm4(n: int, seed: int) -> OdmMatrix:
    """Random ODM keeping only every fourth (1-based) destination column."""
    raw = random_raw(n, seed)
    keep = np.zeros(n, dtype=bool)
    keep[3::4] = True
    raw[:, ~keep] = 0.0
    return normalize_odm(raw)


# --------------------------------------------------------------------------
# per-station rates


@dataclass
class DemandProfile:
    rates: np.ndarray                 # groups / second, per station
    tiers: np.ndarray
    boarding: Triangular = DEFAULT_BOARDING
    alighting: Triangular = DEFAULT_ALIGHTING

    @property
    def total_per_hour(self) -> float:
        return float(self.rates.sum() * SECONDS_PER_HOUR)

    def fallback_interarrival(self, station: int) -> float:
        r = self.rates[station]
        return 1.0 / r if r > 0 else math.inf


def auto_tiers(n: int) -> np.ndarray:
    """Equal thirds at 2/3, 1 and 4/3 of the average, in a fixed shuffled order."""
    if n % 3:
        raise DemandError(f"automatic tiering needs a station count divisible by 3, got {n}")
    base = np.repeat([TIER_MID, TIER_LOW, TIER_HIGH], n // 3)
    return np.random.default_rng(TIER_SEED).permutation(base)


def make_station_rates(lambda_total: float, n: int, tiers="auto",
                       boarding: Triangular = DEFAULT_BOARDING,
                       alighting: Triangular = DEFAULT_ALIGHTING) -> DemandProfile:
    """Split a network rate (groups/hour) over ``n`` stations.

    ``tiers`` is ``"auto"``, ``"uniform"`` or an explicit vector of multipliers
    of the average rate; an explicit vector must average to 1.
    """
    if lambda_total < 0:
        raise DemandError("demand must be nonnegative")
    if isinstance(tiers, str):
        if tiers == "auto":
            t = auto_tiers(n)
        elif tiers == "uniform":
            t = np.ones(n)
        else:
            raise DemandError(f"unknown tier map {tiers!r}")
    else:
        t = np.asarray(tiers, dtype=float)
        if t.shape != (n,):
            raise DemandError("tier vector length must equal the station count")
        if np.any(t < 0) or not math.isclose(t.sum(), n, rel_tol=1e-12):
            raise DemandError("tier multipliers must be nonnegative and average to 1")
    per_station = lambda_total / n
    rates_h = t * per_station
    return DemandProfile(rates=rates_h / SECONDS_PER_HOUR, tiers=t,
                         boarding=boarding, alighting=alighting)


# --------------------------------------------------------------------------
# sampling


@dataclass
class PassengerGroup:
    origin: int
    destination: int
    size: int
    arrival_time: float
    gid: int = -1


def sample_interarrival(rate: float, rng: np.random.Generator) -> float:
    """Exponential gap with mean 1/rate (rate in groups/second)."""
    if rate <= 0:
        return math.inf
    return float(rng.exponential(1.0 / rate))


def sample_group(odm: OdmMatrix, origin: int, clock: float, rng: np.random.Generator) -> PassengerGroup:
    size = int(rng.integers(1, 5))
    dest = odm.draw(origin, float(rng.random()))
    return PassengerGroup(origin=origin, destination=dest, size=size, arrival_time=clock)


def sample_service_time(dist: Triangular, rng: np.random.Generator) -> float:
    if dist.low == dist.high:
        return dist.low
    return float(rng.triangular(dist.low, dist.mode, dist.high))


# --------------------------------------------------------------------------
# historical inter-arrival statistic


@dataclass
class HistoricalStats:
    """Arrival timestamps per (station, hour-of-day), kept for ``days`` days.

    ``mean_interarrival`` only looks at days strictly before the query day.
    """

    fallback: list[float]
    days: int = 7
    _log: dict = field(default_factory=lambda: defaultdict(dict), repr=False)

    def record_arrival(self, station: int, clock: float) -> None:
        day = int(clock // SECONDS_PER_DAY)
        hour = int((clock % SECONDS_PER_DAY) // SECONDS_PER_HOUR)
        per_day = self._log[(station, hour)]
        per_day.setdefault(day, []).append(clock)
        while len(per_day) > self.days:
            del per_day[min(per_day)]

    def mean_interarrival(self, station: int, clock: float) -> float:
        day = int(clock // SECONDS_PER_DAY)
        hour = int((clock % SECONDS_PER_DAY) // SECONDS_PER_HOUR)
        per_day = self._log.get((station, hour), {})
        total = 0.0
        count = 0
        for d, stamps in per_day.items():
            if d >= day or len(stamps) < 2:
                continue
            total += stamps[-1] - stamps[0]
            count += len(stamps) - 1
        if count == 0:
            return self.fallback[station]
        return total / count


def station_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators for ``n`` nodes derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
