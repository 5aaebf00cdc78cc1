"""PRT network graph: nodes, sectorized one-way segments, distances."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

STATION = "station"
CAPACITOR = "capacitor"
FORK = "fork"
JOIN = "join"
NODE_KINDS = (STATION, CAPACITOR, FORK, JOIN)

ROAD = "road"
HIGHWAY = "highway"
SEGMENT_KINDS = (ROAD, HIGHWAY)

DEFAULT_SPEED = {ROAD: 10.0, HIGHWAY: 15.0}

# (in-degree, out-degree) required for each node kind
_DEGREES = {STATION: (1, 1), CAPACITOR: (1, 1), FORK: (1, 2), JOIN: (2, 1)}


class NetworkError(ValueError):
    """Raised for structurally invalid networks or impossible queries."""


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    berths: int = 0
    entry_buffer: int = 0
    exit_buffer: int = 0
    x: float = 0.0
    y: float = 0.0

    @property
    def is_terminal(self) -> bool:
        return self.kind in (STATION, CAPACITOR)


@dataclass(frozen=True)
class Segment:
    src: str
    dst: str
    kind: str
    length: float
    speed_limit: float


@dataclass
class Network:
    """Directed PRT graph.

    Node order is normalized on construction: stations first, then
    capacitors, then intersections, each group in the order given.
    Segments keep their given order; ``sectors[k]`` is the whole number of
    sectors segment ``k`` is divided into.
    """

    nodes: list[Node]
    segments: list[Segment]
    sector_length: float = 2.0
    name: str = ""
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        rank = {STATION: 0, CAPACITOR: 1, FORK: 2, JOIN: 2}
        self.nodes = sorted(self.nodes, key=lambda n: rank.get(n.kind, 3))
        self.index = {n.id: i for i, n in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise NetworkError("duplicate node id")
        if self.sector_length <= 0:
            raise NetworkError("sector_length must be positive")
        self.out_segments: list[list[int]] = [[] for _ in self.nodes]
        self.in_segments: list[list[int]] = [[] for _ in self.nodes]
        for k, seg in enumerate(self.segments):
            if seg.src not in self.index or seg.dst not in self.index:
                raise NetworkError(f"segment {seg.src}->{seg.dst} references unknown node")
            self.out_segments[self.index[seg.src]].append(k)
            self.in_segments[self.index[seg.dst]].append(k)
        self.sectors = [max(1, int(round(s.length / self.sector_length))) for s in self.segments]

    @property
    def station_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == STATION]

    @property
    def capacitor_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == CAPACITOR]

    @property
    def terminal_ids(self) -> list[str]:
        return [n.id for n in self.nodes if n.is_terminal]

    @property
    def n_stations(self) -> int:
        return sum(1 for n in self.nodes if n.kind == STATION)

    @property
    def n_terminals(self) -> int:
        return sum(1 for n in self.nodes if n.is_terminal)

    def node(self, node_id: str) -> Node:
        return self.nodes[self.index[node_id]]

    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def segment_length(self, k: int) -> float:
        """Length actually simulated: a whole number of sectors."""
        return self.sectors[k] * self.sector_length


@dataclass
class DistanceTable:
    """Shortest track distances between terminal nodes (stations + capacitors).

    ``D[a, b]`` is indexed by terminal position, i.e. the order of
    ``Network.terminal_ids``; stations occupy the first ``n_stations`` rows.
    """

    ids: list[str]
    D: np.ndarray
    n_stations: int
    D_av: float

    def __post_init__(self):
        self.pos = {node_id: i for i, node_id in enumerate(self.ids)}

    def dist(self, a: str, b: str) -> float:
        return float(self.D[self.pos[a], self.pos[b]])


# --------------------------------------------------------------------------
# validation


def validate_network(net: Network) -> list[str]:
    """Return every structural violation found; an empty list means valid."""
    problems = []
    for i, node in enumerate(net.nodes):
        if node.kind not in NODE_KINDS:
            problems.append(f"node {node.id}: unknown kind {node.kind!r}")
            continue
        want_in, want_out = _DEGREES[node.kind]
        got_in, got_out = len(net.in_segments[i]), len(net.out_segments[i])
        if (got_in, got_out) != (want_in, want_out):
            problems.append(
                f"node {node.id}: {node.kind} needs {want_in} in / {want_out} out, "
                f"has {got_in} in / {got_out} out"
            )
        if node.is_terminal and node.berths < 1:
            problems.append(f"node {node.id}: {node.kind} must have at least one berth")
        if node.kind == STATION and (node.entry_buffer < 0 or node.exit_buffer < 1):
            problems.append(f"node {node.id}: station needs exit_buffer >= 1 and entry_buffer >= 0")

    for seg in net.segments:
        tag = f"segment {seg.src}->{seg.dst}"
        if seg.kind not in SEGMENT_KINDS:
            problems.append(f"{tag}: unknown kind {seg.kind!r}")
        if not seg.length > 0:
            problems.append(f"{tag}: length must be positive")
        if not seg.speed_limit > 0:
            problems.append(f"{tag}: speed limit must be positive")
        if seg.kind == HIGHWAY and seg.src in net.index and seg.dst in net.index:
            for end in (seg.src, seg.dst):
                if net.node(end).is_terminal:
                    problems.append(f"{tag}: highway touches {net.node(end).kind} {end}")
        if seg.src == seg.dst:
            problems.append(f"{tag}: self loop")

    if net.n_stations < 2:
        problems.append("network needs at least two stations")

    # connectivity among terminals; routes may not pass through a terminal
    terminals = [i for i, n in enumerate(net.nodes) if n.is_terminal]
    for a in terminals:
        reach = _reachable_terminals(net, a)
        for b in terminals:
            if b != a and b not in reach:
                problems.append(f"{net.nodes[b].id} unreachable from {net.nodes[a].id}")
    return problems


def _reachable_terminals(net: Network, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    found = set()
    while stack:
        u = stack.pop()
        if u != start and net.nodes[u].is_terminal:
            found.add(u)
            continue
        for k in net.out_segments[u]:
            v = net.index[net.segments[k].dst]
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return found


# --------------------------------------------------------------------------
# shortest paths


def dijkstra(net: Network, source: int, cost) -> tuple[list[float], list[int]]:
    """Single-source Dijkstra over segment costs ``cost(k)``.

    Terminal nodes other than ``source`` are sinks: a route can end at a
    station or capacitor but never pass through one. Returns per-node
    distance and the segment used to reach each node (-1 if none).

    Equal-cost ties keep the predecessor whose node-id sequence is
    lexicographically smallest, so results do not depend on segment order.
    """
    n = len(net.nodes)
    dist = [math.inf] * n
    via = [-1] * n
    label: list[tuple] = [()] * n
    dist[source] = 0.0
    label[source] = (net.nodes[source].id,)
    heap = [(0.0, label[source], source)]
    done = [False] * n
    while heap:
        d, lab, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u != source and net.nodes[u].is_terminal:
            continue
        for k in net.out_segments[u]:
            v = net.index[net.segments[k].dst]
            if done[v]:
                continue
            nd = d + cost(k)
            nlab = lab + (net.nodes[v].id,)
            if nd < dist[v] or (nd == dist[v] and nlab < label[v]):
                dist[v] = nd
                via[v] = k
                label[v] = nlab
                heapq.heappush(heap, (nd, nlab, v))
    return dist, via


def shortest_distances(net: Network) -> DistanceTable:
    """All-pairs shortest track distance (meters) between terminals."""
    ids = net.terminal_ids
    n_term = len(ids)
    D = np.zeros((n_term, n_term))
    for a in range(n_term):
        dist, _ = dijkstra(net, net.index[ids[a]], lambda k: net.segments[k].length)
        for b in range(n_term):
            d = dist[net.index[ids[b]]]
            if math.isinf(d):
                raise NetworkError(f"{ids[b]} unreachable from {ids[a]}")
            D[a, b] = d
    ns = net.n_stations
    if ns < 2:
        raise NetworkError("need at least two stations for D_av")
    block = D[:ns, :ns]
    d_av = float(block.sum() / (ns * (ns - 1)))
    return DistanceTable(ids=ids, D=D, n_stations=ns, D_av=d_av)


def normalized_inverse_distance(table: DistanceTable, x: str, i: str) -> float:
    """ND_xi = D_av / D_xi; 1.0 at the mean inter-station distance."""
    if x == i:
        raise NetworkError("normalized inverse distance undefined for a node and itself")
    d = table.dist(x, i)
    if d <= 0:
        raise NetworkError(f"non-positive distance {x}->{i}")
    return table.D_av / d


# --------------------------------------------------------------------------
# file format


def load_network(path: str | Path) -> Network:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return network_from_dict(doc)


def network_from_dict(doc: dict) -> Network:
    nodes = []
    for raw in doc.get("nodes", []):
        nodes.append(
            Node(
                id=str(raw["id"]),
                kind=raw["kind"],
                berths=int(raw.get("berths", 0)),
                entry_buffer=int(raw.get("entry_buffer", 0)),
                exit_buffer=int(raw.get("exit_buffer", 0)),
                x=float(raw.get("x", 0.0)),
                y=float(raw.get("y", 0.0)),
            )
        )
    segments = []
    for raw in doc.get("segments", []):
        kind = raw.get("kind", ROAD)
        segments.append(
            Segment(
                src=str(raw["from"]),
                dst=str(raw["to"]),
                kind=kind,
                length=float(raw["length_m"]),
                speed_limit=float(raw.get("speed_mps", DEFAULT_SPEED.get(kind, 10.0))),
            )
        )
    return Network(
        nodes=nodes,
        segments=segments,
        sector_length=float(doc.get("sector_length", 2.0)),
        name=str(doc.get("name", "")),
    )


def network_to_dict(net: Network) -> dict:
    nodes = []
    for n in net.nodes:
        row = {"id": n.id, "kind": n.kind}
        if n.is_terminal:
            row["berths"] = n.berths
        if n.kind == STATION:
            row["entry_buffer"] = n.entry_buffer
            row["exit_buffer"] = n.exit_buffer
        row["x"] = round(n.x, 1)
        row["y"] = round(n.y, 1)
        nodes.append(row)
    segments = [
        {
            "from": s.src,
            "to": s.dst,
            "kind": s.kind,
            "length_m": round(s.length, 1),
            "speed_mps": s.speed_limit,
        }
        for s in net.segments
    ]
    return {"name": net.name, "sector_length": net.sector_length, "nodes": nodes, "segments": segments}


def save_network(net: Network, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(network_to_dict(net), fh, sort_keys=False, default_flow_style=None)
