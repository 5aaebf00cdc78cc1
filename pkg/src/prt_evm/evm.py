"""Empty-vehicle management: one eligibility/score/argmax procedure, four tasks.

Every task (balancing, calling, expelling, withdrawing) runs the same
``select_target`` with its own factor/threshold vector. A station
controller only ever sees snapshots of nodes inside its horizon; the
``HorizonAccess`` wrapper is the message boundary that enforces this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .network import DistanceTable

BALANCING = "B"
CALLING = "C"
EXPELLING = "E"
WITHDRAWING = "W"
TASKS = (BALANCING, CALLING, EXPELLING, WITHDRAWING)

STATIONS = "stations"
CAPACITORS = "capacitors"
BOTH = "both"

# condition (4) conventions
PAPER_LITERAL = "paper_literal"
SOURCE_MINUS_DESTINATION = "source_minus_destination"
AFTER_MOVE = "after_move"    # source minus destination, evaluated as if the vehicle had moved
CONVENTIONS = (AFTER_MOVE, SOURCE_MINUS_DESTINATION, PAPER_LITERAL)

REL_Q = "-H+1"
REL_EB = "1/H"

CAPACITOR_PI = 1e9


class LocalityError(RuntimeError):
    """A controller asked for the state of a node outside its horizon."""


@dataclass(frozen=True)
class StationSnapshot:
    node: str
    H: int
    Q: int
    K: int
    L: int
    Z: int
    PI: float
    is_capacitor: bool = False

    @property
    def empty_fraction(self) -> float:
        return (self.L + self.Z - self.Q) / self.H


@dataclass(frozen=True)
class TaskParams:
    """Factors and thresholds of one task.

    ``T_Q`` and ``T_EB`` take either a number or the per-node expressions
    ``"-H+1"`` / ``"1/H"``, evaluated with the candidate's berth count.
    ``T_ND = 0`` means an infinite horizon.
    """

    F_Q: float = 0.0
    F_EB: float = 0.0
    F_ND: float = 0.0
    F_AI: float = 0.0
    T_Q: float | str = REL_Q
    T_EB: float | str = REL_EB
    T_EV: float = 0.0
    T_ND: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.T_ND < 0:
            raise ValueError("T_ND must be >= 0 (0 encodes an infinite horizon)")
        if isinstance(self.T_Q, str) and self.T_Q != REL_Q:
            raise ValueError(f"T_Q must be a number or {REL_Q!r}")
        if isinstance(self.T_EB, str) and self.T_EB != REL_EB:
            raise ValueError(f"T_EB must be a number or {REL_EB!r}")

    @property
    def relative_thresholds(self) -> bool:
        return self.T_Q == REL_Q and self.T_EB == REL_EB

    def queue_threshold(self, H: int) -> float:
        return -H + 1 if self.T_Q == REL_Q else self.T_Q

    def berth_threshold(self, H: int) -> float:
        return 1.0 / H if self.T_EB == REL_EB else self.T_EB

    @property
    def factors(self) -> tuple[float, float, float, float]:
        return (self.F_Q, self.F_EB, self.F_ND, self.F_AI)

    def with_factors(self, F_Q, F_EB, F_ND, F_AI) -> "TaskParams":
        return replace(self, F_Q=F_Q, F_EB=F_EB, F_ND=F_ND, F_AI=F_AI)


# the four factor bits of a tag, in tag order (F_EB, F_Q, F_ND, F_AI)
TAG_ON_VALUES = {"F_EB": 1.0, "F_Q": 1.0, "F_ND": 1.0, "F_AI": 5.0}


def balancing_from_tag(tag: str, T_ND: float = 1.0) -> TaskParams:
    """Expand a 4-bit tag ``(EB, Q, ND, AI)`` into balancing parameters."""
    if len(tag) != 4 or set(tag) - {"0", "1"}:
        raise ValueError(f"tag must be four binary digits, got {tag!r}")
    on = dict(zip(("F_EB", "F_Q", "F_ND", "F_AI"), (c == "1" for c in tag)))
    vals = {k: (TAG_ON_VALUES[k] if on[k] else 0.0) for k in on}
    return TaskParams(**vals, T_Q=REL_Q, T_EB=REL_EB, T_EV=0.0, T_ND=T_ND, T=1.0)


def default_calling() -> TaskParams:
    return TaskParams(F_Q=0, F_EB=0, F_ND=5, F_AI=0, T_Q=REL_Q, T_EB=REL_EB,
                      T_EV=0.0, T_ND=0.0, T=0.0)


def default_expelling() -> TaskParams:
    return TaskParams(F_Q=1, F_EB=1, F_ND=1, F_AI=0, T_Q=REL_Q, T_EB=REL_EB,
                      T_EV=-math.inf, T_ND=0.0, T=-math.inf)


def default_withdrawing() -> TaskParams:
    return TaskParams(F_Q=0, F_EB=1, F_ND=1, F_AI=0, T_Q=-math.inf, T_EB=REL_EB,
                      T_EV=-math.inf, T_ND=0.0, T=-math.inf)


@dataclass(frozen=True)
class EvmConfig:
    balancing: TaskParams = field(default_factory=lambda: balancing_from_tag("1111"))
    calling: TaskParams = field(default_factory=default_calling)
    expelling: TaskParams = field(default_factory=default_expelling)
    withdrawing: TaskParams = field(default_factory=default_withdrawing)
    balancing_period: float = 30.0
    withdraw_timeout: float = math.inf
    convention: str = AFTER_MOVE
    expelling_enabled: bool = True
    calling_enabled: bool = True

    def __post_init__(self):
        if not self.balancing_period > 0:
            raise ValueError("balancing_period must be positive")
        if not self.withdraw_timeout > 0:
            raise ValueError("withdraw_timeout must be positive")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")

    def params(self, task: str) -> TaskParams:
        return {BALANCING: self.balancing, CALLING: self.calling,
                EXPELLING: self.expelling, WITHDRAWING: self.withdrawing}[task]


@dataclass(frozen=True)
class Decision:
    task: str
    vehicle: int
    src: str
    dst: str
    score: float
    time: float


# --------------------------------------------------------------------------
# the generic procedure


def x_is_source(task: str) -> bool:
    """Calling moves a vehicle toward x; every other task moves one away from x."""
    return task != CALLING


def candidate_kind(task: str) -> str:
    return {BALANCING: STATIONS, CALLING: BOTH, EXPELLING: BOTH, WITHDRAWING: CAPACITORS}[task]


def trip_distance(table: DistanceTable, x: str, i: str, task: str) -> float:
    """Length of the empty trip the decision would create."""
    return table.dist(x, i) if x_is_source(task) else table.dist(i, x)


def horizon_view(x: str, T_ND: float, table: DistanceTable, kind: str = STATIONS,
                 inbound: bool = False) -> list[str]:
    """Nodes of ``kind`` other than ``x`` with ND >= T_ND.

    Distances run x -> i, or i -> x when ``inbound`` (trips toward x).
    """
    if kind == STATIONS:
        pool = table.ids[:table.n_stations]
    elif kind == CAPACITORS:
        pool = table.ids[table.n_stations:]
    elif kind == BOTH:
        pool = table.ids
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")
    out = []
    for i in pool:
        if i == x:
            continue
        if T_ND == 0:
            out.append(i)
            continue
        d = table.dist(i, x) if inbound else table.dist(x, i)
        if table.D_av / d >= T_ND:
            out.append(i)
    return out


def fraction_difference(x: StationSnapshot, i: StationSnapshot, convention: str,
                        x_source: bool = True) -> float:
    """Left-hand side of the empty-fraction condition.

    ``after_move`` compares source and destination as they will be once the
    vehicle has moved, so two stations never trade a vehicle back and forth.
    """
    if convention == PAPER_LITERAL:
        return i.empty_fraction - x.empty_fraction
    src, dst = (x, i) if x_source else (i, x)
    if convention == SOURCE_MINUS_DESTINATION:
        return src.empty_fraction - dst.empty_fraction
    if convention == AFTER_MOVE:
        return ((src.L + src.Z - src.Q - 1) / src.H) - ((dst.L + dst.Z - dst.Q + 1) / dst.H)
    raise ValueError(f"unknown convention {convention!r}")


def eligible(x: StationSnapshot, i: StationSnapshot, nd_xi: float, p: TaskParams,
             convention: str = AFTER_MOVE, x_source: bool = True) -> bool:
    """All four threshold conditions for candidate ``i`` seen from ``x``.

    The queue and berth conditions concern the node the vehicle would go
    to: ``i`` when ``x`` sends, ``x`` itself when ``x`` calls. A capacitor
    has no demand of its own, so under the source-based conventions a
    capacitor source always passes the empty-fraction condition; otherwise
    its parked vehicles would never rejoin service.
    """
    dst = i if x_source else x
    src = x if x_source else i
    if not (dst.Q - dst.L - dst.Z >= p.queue_threshold(dst.H)):
        return False
    if not ((dst.H - dst.K + dst.Q - dst.Z) / dst.H >= p.berth_threshold(dst.H)):
        return False
    if not (nd_xi >= p.T_ND):
        return False
    if src.is_capacitor and convention != PAPER_LITERAL:
        return True
    return fraction_difference(x, i, convention, x_source) >= p.T_EV


def score(i: StationSnapshot, nd_xi: float, p: TaskParams) -> float:
    """Weighted sum over the trip's destination ``i`` and the pair distance."""
    return (p.F_Q * (i.Q - i.L - i.Z)
            + p.F_EB * (i.H - i.K + i.Q - i.Z)
            + p.F_ND * nd_xi
            + p.F_AI / i.PI)


class World(Protocol):
    """What a station controller can reach. Implemented by the simulator."""

    table: DistanceTable
    clock: float

    def snapshot(self, node: str) -> StationSnapshot: ...
    def movable(self, node: str) -> list[int]: ...
    def rng(self, node: str) -> np.random.Generator: ...
    def execute(self, decision: Decision) -> None: ...


class HorizonAccess:
    """Snapshot access for controller ``x`` restricted to its horizon."""

    def __init__(self, world: World, x: str, allowed, task: str):
        self.world = world
        self.x = x
        self.allowed = set(allowed)
        self.allowed.add(x)
        self.task = task

    def snapshot(self, node: str) -> StationSnapshot:
        log = getattr(self.world, "query_log", None)
        if log is not None:
            log[self.task, self.x, node] += 1
        if node not in self.allowed:
            raise LocalityError(f"{self.task}@{self.x}: {node} is beyond the horizon")
        return self.world.snapshot(node)


def select_target(x: str, task: str, world: World, p: TaskParams,
                  convention: str = AFTER_MOVE,
                  vehicle: int | None = None) -> Decision | None:
    """Run the generic procedure for controller ``x``.

    Returns the winning empty trip, or None when nothing is eligible, the
    best score is below ``p.T`` or the source has no movable vehicle.
    ``vehicle`` pins the vehicle to move (withdraw timeouts); otherwise one
    idle empty vehicle at the source is drawn from the source's stream.
    """
    table = world.table
    inbound = not x_is_source(task)
    cands = horizon_view(x, p.T_ND, table, candidate_kind(task), inbound=inbound)
    access = HorizonAccess(world, x, cands, task)
    sx = access.snapshot(x)
    if x_is_source(task) and sx.L < 1:
        return None

    best = None
    best_key = None
    for i in cands:
        si = access.snapshot(i)
        if inbound and si.L < 1:
            continue
        d = trip_distance(table, x, i, task)
        nd = table.D_av / d
        if not eligible(sx, si, nd, p, convention, x_source=not inbound):
            continue
        s = score(sx if inbound else si, nd, p)
        key = (-s, d, i)
        if best_key is None or key < best_key:
            best_key = key
            best = (i, s)
    if best is None or not best[1] >= p.T:
        return None

    target, s = best
    src, dst = (target, x) if inbound else (x, target)
    if vehicle is None:
        pool = world.movable(src)
        if not pool:
            return None
        vehicle = pool[int(world.rng(src).integers(len(pool)))] if len(pool) > 1 else pool[0]
    return Decision(task, vehicle, src, dst, s, world.clock)


# --------------------------------------------------------------------------
# triggers


class EmptyVehicleManager:
    """Per-station controllers for the four tasks, driven by simulator events."""

    def __init__(self, world: World, config: EvmConfig):
        self.world = world
        self.config = config

    def _run(self, x, task, vehicle=None):
        d = select_target(x, task, self.world, self.config.params(task),
                          self.config.convention, vehicle=vehicle)
        if d is not None:
            self.world.execute(d)
        return d

    def on_balancing_tick(self, x: str) -> list[Decision]:
        """Periodic balancing at ``x``; repeats while ``x`` still finds a target."""
        out = []
        for _ in range(self.world.snapshot(x).L):
            d = self._run(x, BALANCING)
            if d is None:
                break
            out.append(d)
        return out

    def on_calling_event(self, x: str) -> Decision | None:
        """Call one empty vehicle toward ``x``."""
        if not self.config.calling_enabled:
            return None
        return self._run(x, CALLING)

    def on_expelling_event(self, x: str, needed: int = 1) -> list[Decision]:
        out = []
        if not self.config.expelling_enabled:
            return out
        for _ in range(needed):
            d = self._run(x, EXPELLING)
            if d is None:
                break
            out.append(d)
        return out

    def on_withdraw_timeout(self, x: str, vehicle: int) -> Decision | None:
        if math.isinf(self.config.withdraw_timeout):
            return None
        return self._run(x, WITHDRAWING, vehicle=vehicle)
