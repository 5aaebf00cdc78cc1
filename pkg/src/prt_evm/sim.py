"""Discrete-event PRT simulation: stations, vehicle lifecycle, EVM hooks.

Vehicle movement on the guideway is delegated to the track kernel
(``track.Track``). This module owns everything that happens at nodes:
queues, berths, entry and exit buffers, boarding and alighting, and the
triggers that drive the empty-vehicle manager.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from . import track as track_mod
from .demand import (
    HistoricalStats,
    PassengerGroup,
    make_station_rates,
    sample_group,
    sample_interarrival,
    sample_service_time,
    station_streams,
    uniform_odm,
)
from .evm import CAPACITOR_PI, Decision, EmptyVehicleManager, StationSnapshot
from .network import HIGHWAY, Network, shortest_distances
from .routing import Normalizers, RouteTable
from .scenario import Scenario, build_odm

log = logging.getLogger(__name__)

# vehicle status
IDLE = 0          # empty and movable (berth or entry buffer)
BOARDING = 1
ALIGHTING = 2
DEPARTING = 3     # dispatched, waiting for an exit-buffer slot
EXITING = 4       # in the exit buffer
TRAVEL = 5        # on the guideway
ARRIVING = 6      # full, in the entry buffer, waiting for a berth

# vehicle place
AT_BERTH = "berth"
AT_ENTRY = "entry"
AT_EXIT = "exit"
ON_TRACK = "track"

FULL = "full"
EMPTY = "empty"

# calendar event kinds
_GROUP = 0
_BOARD_DONE = 1
_ALIGHT_DONE = 2
_TICK = 3
_WITHDRAW = 4


class SimError(RuntimeError):
    pass


class DeadlockError(SimError):
    def __init__(self, msg, dump):
        super().__init__(f"{msg}\n{dump}")
        self.dump = dump


class AuditError(SimError):
    pass


@dataclass
class Trip:
    kind: str
    origin: int
    destination: int
    dispatch_time: float
    segments: list
    length: float


class Vehicle:
    __slots__ = ("id", "node", "place", "slot", "status", "group", "trip", "idle_since")

    def __init__(self, vid):
        self.id = vid
        self.node = -1
        self.place = None
        self.slot = -1
        self.status = IDLE
        self.group = None
        self.trip = None
        self.idle_since = 0.0


class NodeState:
    __slots__ = ("idx", "id", "is_capacitor", "H", "E", "X", "queue", "berth", "K", "L",
                 "Z", "entry", "exit", "departing", "approaching", "waiting")

    def __init__(self, idx, node):
        self.idx = idx
        self.id = node.id
        self.is_capacitor = not node.kind == "station"
        self.H = node.berths
        self.E = node.entry_buffer if not self.is_capacitor else 0
        self.X = max(1, node.exit_buffer) if not self.is_capacitor else 1
        self.queue = deque()
        self.berth = [-1] * self.H
        self.K = 0
        self.L = 0
        self.Z = 0
        self.entry = []          # vehicle ids, FIFO
        self.exit = deque()      # vehicle ids, head is trying to join traffic
        self.departing = deque()
        self.approaching = []    # on the final segment or waiting at the end, in order
        self.waiting = deque()   # at the end of the route, not yet admitted


@dataclass
class Stats:
    waits: list = field(default_factory=list)
    net: int = 0
    etm_m: float = 0.0
    served: int = 0
    generated: int = 0
    served_total: int = 0
    full_trips_done: int = 0
    decisions: Counter = field(default_factory=Counter)


def _track_speeds(net: Network, v_road: float, v_highway: float) -> list[float]:
    return [min(s.speed_limit, v_highway if s.kind == HIGHWAY else v_road) for s in net.segments]


class Simulation:
    """One seeded run of a scenario on a network."""

    def __init__(self, scenario: Scenario, net: Network, seed: int | None = None, *,
                 audit: bool = False, event_log: list | None = None,
                 backend: str | None = None, table=None, stall_timeout: float = 3600.0):
        self.scenario = sc = scenario
        self.net = net
        self.seed = sc.sim.seed if seed is None else seed
        self.audit = audit
        self.events = event_log
        self.stall_timeout = stall_timeout

        vc = sc.vehicles
        if vc.J < 0:
            raise SimError("fleet size must be nonnegative")
        if net.sector_length > vc.separation / 2 + 1e-12:
            raise SimError("sector length must not exceed half the separation")

        self.table = table if table is not None else shortest_distances(net)
        self.routes = RouteTable(net, sc.routing, Normalizers.for_network(net, self.table, vc.J))
        n_st = net.n_stations
        self.n_stations = n_st
        self.nodes = [NodeState(i, net.nodes[i]) for i in range(net.n_terminals)]
        self.node_of = {s.id: s for s in self.nodes}

        self.saturated = sc.saturated
        self.odm = uniform_odm(n_st) if sc.saturated else build_odm(sc.demand.odm, n_st)
        self.profile = make_station_rates(sc.demand.lambda_total, n_st, sc.demand.tier_map,
                                          sc.demand.boarding, sc.demand.alighting)
        self.hist = HistoricalStats([self.profile.fallback_interarrival(i) for i in range(n_st)])
        streams = station_streams(self.seed, 2 * net.n_terminals)
        self._demand_rng = streams[:net.n_terminals]
        self._control_rng = streams[net.n_terminals:]

        self.track = track_mod.make_track(
            [net.sectors[k] for k in range(len(net.segments))],
            _track_speeds(net, vc.v_road, vc.v_highway),
            net.sector_length, int(math.ceil(vc.separation / net.sector_length - 1e-9)),
            vc.a_max, vc.d_max, max(vc.J, 1), backend=backend)

        self.evm = EmptyVehicleManager(self, sc.evm)
        self.evm_enabled = not sc.saturated
        self.query_log: Counter = Counter()
        self.decision_log: list[tuple] = []

        self.clock = 0.0
        self.t_start = sc.sim.warmup_s
        self.t_end = sc.sim.warmup_s + sc.sim.duration_s
        self.stats = Stats()
        self._cal = []
        self._seq = 0
        self._gid = 0
        self._new_idle = []
        self._calls_pending = set()
        self._last_progress = 0.0

        self.vehicles = [Vehicle(v) for v in range(vc.J)]
        self._place_fleet(sc.placement if not sc.saturated else "stations")
        self._schedule_initial()

    # ------------------------------------------------------------ setup

    def _place_fleet(self, mode: str):
        if mode == "capacitors":
            order = [n for n in self.nodes if n.is_capacitor] or self.nodes[:self.n_stations]
        elif mode == "stations":
            order = self.nodes[:self.n_stations]
        else:
            raise SimError(f"unknown placement {mode!r}")
        spill = [n for n in self.nodes if n not in order]
        k = 0
        for v in self.vehicles:
            placed = False
            for j in range(len(order)):
                n = order[(k + j) % len(order)]
                if n.K < n.H:
                    self._put_berth(v, n)
                    k = (k + j + 1) % len(order)
                    placed = True
                    break
            if not placed:
                for n in order + spill:
                    if n.K < n.H:
                        self._put_berth(v, n)
                        placed = True
                        break
                    if len(n.entry) < n.E:
                        v.node, v.place, v.slot = n.idx, AT_ENTRY, -1
                        n.entry.append(v.id)
                        placed = True
                        break
            if not placed:
                raise SimError("fleet does not fit into the network's berths and buffers")
            v.status = IDLE
            self.nodes[v.node].L += 1

    def _put_berth(self, v, n):
        b = n.berth.index(-1)
        n.berth[b] = v.id
        n.K += 1
        v.node, v.place, v.slot = n.idx, AT_BERTH, b

    def _schedule_initial(self):
        if not self.saturated:
            for i in range(self.n_stations):
                self._next_arrival(i, 0.0)
            if self.evm_enabled:
                period = self.scenario.evm.balancing_period
                nt = len(self.nodes)
                for n in self.nodes:
                    self._push(period * (n.idx + 1) / nt, _TICK, n.idx)
        else:
            for n in self.nodes[:self.n_stations]:
                self._serve_queue(n)

    # ------------------------------------------------------------ calendar

    def _push(self, t, kind, arg):
        heapq.heappush(self._cal, (t, self._seq, kind, arg))
        self._seq += 1

    def _next_arrival(self, i, t):
        dt = sample_interarrival(self.profile.rates[i], self._demand_rng[i])
        if math.isfinite(dt):
            self._push(t + dt, _GROUP, i)

    def _emit(self, kind, vid, where, detail=""):
        if self.events is not None:
            self.events.append((self.clock, kind, vid, where, detail))

    def _in_window(self):
        return self.t_start <= self.clock < self.t_end

    # ------------------------------------------------------------ world (EVM side)

    def snapshot(self, node: str) -> StationSnapshot:
        n = self.node_of[node]
        if n.is_capacitor:
            return StationSnapshot(node, n.H, 0, n.K, n.L, n.Z, CAPACITOR_PI, True)
        return StationSnapshot(node, n.H, len(n.queue), n.K, n.L, n.Z,
                               self.hist.mean_interarrival(n.idx, self.clock), False)

    def movable(self, node: str) -> list[int]:
        n = self.node_of[node]
        out = [v for v in n.berth if v >= 0 and self.vehicles[v].status == IDLE]
        out += [v for v in n.entry if self.vehicles[v].status == IDLE]
        out.sort()
        return out

    def rng(self, node: str) -> np.random.Generator:
        return self._control_rng[self.node_of[node].idx]

    def execute(self, d: Decision) -> None:
        v = self.vehicles[d.vehicle]
        src = self.node_of[d.src]
        if v.status != IDLE or v.node != src.idx:
            raise SimError(f"vehicle {v.id} is not movable at {d.src}")
        self.decision_log.append((self.clock, d.task, d.vehicle, d.src, d.dst, d.score))
        self.stats.decisions[d.task] += 1
        self._emit("decision", v.id, d.src, f"{d.task}:{d.dst}")
        self._dispatch(v, self.node_of[d.dst].idx, EMPTY)

    # ------------------------------------------------------------ station internals

    def _serve_queue(self, n: NodeState):
        if n.is_capacitor:
            return
        while n.queue or self.saturated:
            vid = -1
            for b in n.berth:
                if b >= 0 and self.vehicles[b].status == IDLE:
                    vid = b
                    break
            if vid < 0:
                return
            if self.saturated and not n.queue:
                self._new_group(n.idx)
            g = n.queue.popleft()
            v = self.vehicles[vid]
            v.status = BOARDING
            v.group = g
            n.L -= 1
            if self._in_window():
                self.stats.waits.append(self.clock - g.arrival_time)
            self._emit("board_start", vid, n.id, f"g{g.gid}")
            self._push(self.clock + sample_service_time(self.profile.boarding,
                                                        self._demand_rng[n.idx]),
                       _BOARD_DONE, vid)

    def _new_group(self, i):
        g = sample_group(self.odm, i, self.clock, self._demand_rng[i])
        g.gid = self._gid
        self._gid += 1
        self.stats.generated += 1
        self.nodes[i].queue.append(g)
        if not self.saturated:
            self.hist.record_arrival(i, self.clock)
        return g

    def _can_accept(self, n: NodeState) -> bool:
        return len(n.entry) < n.E or (not n.entry and n.K < n.H)

    def _settle(self, n: NodeState):
        """Move entry-buffer vehicles to berths and admit waiting arrivals."""
        while True:
            progressed = False
            while n.K < n.H:
                j = next((j for j, v in enumerate(n.entry)
                          if self.vehicles[v].status != DEPARTING), -1)
                if j < 0:
                    break
                v = self.vehicles[n.entry.pop(j)]
                self._put_berth(v, n)
                progressed = True
                if v.status == ARRIVING:
                    v.status = ALIGHTING
                    self._emit("alight_start", v.id, n.id, f"g{v.group.gid}")
                    self._push(self.clock + sample_service_time(self.profile.alighting,
                                                                self._demand_rng[n.idx]),
                               _ALIGHT_DONE, v.id)
            while n.waiting and self._can_accept(n):
                self._admit(self.vehicles[n.waiting.popleft()], n)
                progressed = True
            if not progressed:
                break
        self._serve_queue(n)

    def _admit(self, v: Vehicle, n: NodeState):
        self.track.remove(v.id, self.clock)
        n.approaching.remove(v.id)
        n.Z -= 1
        v.node, v.place, v.slot = n.idx, AT_ENTRY, -1
        n.entry.append(v.id)
        self._emit("admit", v.id, n.id, v.trip.kind)
        if v.trip.kind == FULL:
            v.status = ARRIVING
        else:
            self._make_idle(v, n)
        v.trip = None

    def _make_idle(self, v: Vehicle, n: NodeState):
        v.status = IDLE
        v.idle_since = self.clock
        n.L += 1
        self._new_idle.append(v.id)
        wt = self.scenario.evm.withdraw_timeout
        if self.evm_enabled and math.isfinite(wt) and not n.is_capacitor:
            self._push(self.clock + wt, _WITHDRAW, (v.id, self.clock))

    def _dispatch(self, v: Vehicle, dst: int, kind: str):
        n = self.nodes[v.node]
        if dst == n.idx:
            log.warning("vehicle %d: destination equals current node %s, ignored", v.id, n.id)
            return
        route = self.routes.get(n.id, self.nodes[dst].id,
                                density=self.track.segment_load()
                                if self.scenario.routing.w_density > 0 else None)
        v.trip = Trip(kind, n.idx, dst, self.clock, route.segments, route.length)
        self.nodes[dst].Z += 1
        if kind == EMPTY:
            n.L -= 1
            if self._in_window():
                self.stats.net += 1
                self.stats.etm_m += route.length
        v.status = DEPARTING
        n.departing.append(v.id)
        self._emit("dispatch", v.id, n.id, f"{kind}->{self.nodes[dst].id}")
        self._fill_exit(n)

    def _fill_exit(self, n: NodeState):
        freed = False
        while n.departing and len(n.exit) < n.X:
            v = self.vehicles[n.departing.popleft()]
            if v.place == AT_BERTH:
                n.berth[v.slot] = -1
                n.K -= 1
            else:
                n.entry.remove(v.id)
            freed = True
            v.place, v.slot = AT_EXIT, -1
            v.status = EXITING
            n.exit.append(v.id)
            if len(n.exit) == 1:
                self._launch(v)
        if freed:
            self._settle(n)

    def _launch(self, v: Vehicle):
        self.track.set_route(v.id, v.trip.segments)
        self.track.enter(v.id, self.clock)

    # ------------------------------------------------------------ triggers

    def _check_expel(self, n: NodeState, v: Vehicle):
        if not self.evm_enabled or n.K < n.H or n.L == 0:
            return
        dep_b = sum(1 for b in n.berth if b >= 0 and self.vehicles[b].status == DEPARTING)
        dep_e = sum(1 for e in n.entry if self.vehicles[e].status == DEPARTING)
        free_soon = (n.H - n.K) + dep_b
        ahead = len(n.entry) - dep_e + n.approaching.index(v.id)
        if v.trip.kind == FULL:
            need = ahead + 1 - free_soon
        else:
            need = ahead + 1 - free_soon - n.E
        if need > 0:
            self.evm.on_expelling_event(n.id, min(need, n.L))

    def _call_until_covered(self, n: NodeState):
        while len(n.queue) - n.L - n.Z >= 1:
            if self.evm.on_calling_event(n.id) is None:
                break

    def _run_calls(self):
        """Calling after an event, for queues not covered by vehicles present or inbound.

        A group that found no empty vehicle makes its station call; a vehicle
        that became idle anywhere lets every station with an uncovered queue
        call again.
        """
        if not self.evm_enabled or not self.scenario.evm.calling_enabled:
            self._new_idle.clear()
            self._calls_pending.clear()
            return
        if self._new_idle:
            targets = range(self.n_stations)
        elif self._calls_pending:
            targets = sorted(self._calls_pending)
        else:
            return
        self._new_idle.clear()
        self._calls_pending.clear()
        for i in targets:
            self._call_until_covered(self.nodes[i])

    # ------------------------------------------------------------ handlers

    def _on_group(self, i):
        n = self.nodes[i]
        g = self._new_group(i)
        self._emit("group", -1, n.id, f"g{g.gid}:{self.nodes[g.destination].id}:{g.size}")
        self._next_arrival(i, self.clock)
        self._serve_queue(n)
        if n.L == 0:
            self._calls_pending.add(i)

    def _on_board_done(self, vid):
        v = self.vehicles[vid]
        n = self.nodes[v.node]
        self._emit("board_end", vid, n.id, f"g{v.group.gid}")
        self._dispatch(v, v.group.destination, FULL)

    def _on_alight_done(self, vid):
        v = self.vehicles[vid]
        n = self.nodes[v.node]
        g = v.group
        v.group = None
        self.stats.served_total += 1
        if self._in_window():
            self.stats.served += 1
        self._emit("alight_end", vid, n.id, f"g{g.gid}")
        self._make_idle(v, n)
        self._serve_queue(n)

    def _on_tick(self, idx):
        self.evm.on_balancing_tick(self.nodes[idx].id)
        self._push(self.clock + self.scenario.evm.balancing_period, _TICK, idx)

    def _on_withdraw(self, arg):
        vid, since = arg
        v = self.vehicles[vid]
        if v.status == IDLE and v.idle_since == since:
            self.evm.on_withdraw_timeout(self.nodes[v.node].id, vid)

    def _on_note(self, kind, vid):
        v = self.vehicles[vid]
        if kind == track_mod.ENTERED:
            n = self.nodes[v.node]
            head = n.exit.popleft()
            assert head == vid
            v.node, v.place, v.status = -1, ON_TRACK, TRAVEL
            self._emit("enter", vid, n.id, "")
            if n.exit:
                self._launch(self.vehicles[n.exit[0]])
            self._fill_exit(n)
        elif kind == track_mod.APPROACH:
            n = self.nodes[v.trip.destination]
            n.approaching.append(vid)
            self._emit("approach", vid, n.id, "")
            self._check_expel(n, v)
        else:
            n = self.nodes[v.trip.destination]
            self._emit("arrive", vid, n.id, "")
            if not n.waiting and self._can_accept(n):
                self._admit(v, n)
                self._settle(n)
            else:
                n.waiting.append(vid)
                self._check_expel(n, v)

    _HANDLERS = {_GROUP: _on_group, _BOARD_DONE: _on_board_done,
                 _ALIGHT_DONE: _on_alight_done, _TICK: _on_tick, _WITHDRAW: _on_withdraw}

    # ------------------------------------------------------------ main loop

    def run_until(self, t_end: float) -> "Simulation":
        if t_end < self.clock:
            raise SimError("t_end is before the current clock")
        cal = self._cal
        track = self.track
        handlers = self._HANDLERS
        last_moves = track.n_events
        while True:
            t_cal = cal[0][0] if cal else math.inf
            note = track.step(min(t_cal, t_end))
            if note is not None:
                t, kind, vid = note
                self.clock = t
                self._on_note(kind, vid)
            elif t_cal <= t_end:
                t, _, kind, arg = heapq.heappop(cal)
                self.clock = t
                handlers[kind](self, arg)
            else:
                break
            self._run_calls()
            if self.audit:
                self.check_invariants()
            if track.n_events != last_moves:
                last_moves = track.n_events
                self._last_progress = self.clock
            elif self._stalled():
                raise DeadlockError("no vehicle has moved for too long", self.dump())
        if not cal and track.next_time() == math.inf and self._has_work():
            raise DeadlockError("event calendar is empty with work remaining", self.dump())
        self.clock = max(self.clock, t_end)
        return self

    def run(self) -> "Simulation":
        return self.run_until(self.t_end)

    def _on_track(self):
        return sum(1 for v in self.vehicles if v.status == TRAVEL)

    def _stalled(self):
        if self.clock - self._last_progress < self.stall_timeout:
            return False
        # vehicles stuck mid-route (not merely waiting at a full station) mean gridlock
        for v in self.vehicles:
            if v.status == TRAVEL and self.track.vehicle(v.id)[0] == track_mod.BLOCKED:
                return True
        return False

    def _has_work(self):
        if any(n.queue for n in self.nodes):
            return True
        return any(v.status != IDLE for v in self.vehicles)

    # ------------------------------------------------------------ diagnostics

    def dump(self) -> str:
        lines = [f"clock={self.clock:.3f}"]
        for n in self.nodes:
            lines.append(f"{n.id}: Q={len(n.queue)} K={n.K}/{n.H} L={n.L} Z={n.Z} "
                         f"entry={n.entry} exit={list(n.exit)} waiting={list(n.waiting)}")
        st = Counter(v.status for v in self.vehicles)
        lines.append(f"vehicle status counts: {dict(sorted(st.items()))}")
        return "\n".join(lines)

    def check_invariants(self):
        J = len(self.vehicles)
        seen = Counter()
        for n in self.nodes:
            for b in n.berth:
                if b >= 0:
                    seen[b] += 1
            for e in n.entry:
                seen[e] += 1
            for x in n.exit:
                seen[x] += 1
            if not 0 <= n.K <= n.H or n.K != sum(1 for b in n.berth if b >= 0):
                raise AuditError(f"{n.id}: berth count out of range")
            if len(n.entry) > max(n.E, 1) or len(n.exit) > n.X:
                raise AuditError(f"{n.id}: buffer overflow")
            idle = sum(1 for b in n.berth if b >= 0 and self.vehicles[b].status == IDLE)
            idle += sum(1 for e in n.entry if self.vehicles[e].status == IDLE)
            if idle != n.L:
                raise AuditError(f"{n.id}: L={n.L} but {idle} idle empty vehicles")
        for v in self.vehicles:
            if v.status == TRAVEL:
                seen[v.id] += 1
        if len(seen) != J or any(c != 1 for c in seen.values()):
            raise AuditError("vehicle conservation violated")

        inbound = Counter(v.trip.destination for v in self.vehicles if v.trip is not None)
        for n in self.nodes:
            if inbound[n.idx] != n.Z:
                raise AuditError(f"{n.id}: Z={n.Z} but {inbound[n.idx]} vehicles inbound")
        for v in self.vehicles:
            if (v.group is not None) != (v.status in (BOARDING, ARRIVING, ALIGHTING)
                                         or (v.trip is not None and v.trip.kind == FULL)):
                raise AuditError(f"vehicle {v.id}: occupancy does not match its trip")

        queued = sum(len(n.queue) for n in self.nodes)
        aboard = sum(1 for v in self.vehicles if v.group is not None)
        if self.stats.generated != self.stats.served_total + queued + aboard:
            raise AuditError("passenger accounting does not close")

        gap = self.track.gap
        last = {}
        for k, i, _ in self.track.occupied():
            if k in last and i - last[k] < gap:
                raise AuditError(f"separation violated on segment {k}")
            last[k] = i

    def passengers_in_system(self) -> int:
        return (sum(len(n.queue) for n in self.nodes)
                + sum(1 for v in self.vehicles if v.group is not None))
