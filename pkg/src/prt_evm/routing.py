"""Route planning: Dijkstra over weighted, normalized segment costs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .network import DistanceTable, Network, NetworkError, dijkstra


@dataclass(frozen=True)
class CostWeights:
    w_length: float = 1.0
    w_freetime: float = 1.0
    w_density: float = 0.0

    def __post_init__(self):
        if min(self.w_length, self.w_freetime, self.w_density) < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.w_length + self.w_freetime + self.w_density <= 0:
            raise ValueError("at least one cost weight must be positive")

    def scaled(self, c: float) -> "CostWeights":
        return CostWeights(self.w_length * c, self.w_freetime * c, self.w_density * c)


@dataclass(frozen=True)
class Normalizers:
    d_av: float         # meters
    t_free_av: float    # seconds
    fleet: int          # J

    @classmethod
    def for_network(cls, net: Network, table: DistanceTable, fleet: int) -> "Normalizers":
        return cls(table.D_av, mean_free_time(net), max(fleet, 1))


@dataclass
class Route:
    origin: str
    destination: str
    segments: list[int]
    length: float
    cost: float


def segment_cost(net: Network, k: int, weights: CostWeights, norm: Normalizers,
                 density: float = 0.0) -> float:
    seg = net.segments[k]
    return (weights.w_length * (seg.length / norm.d_av)
            + weights.w_freetime * ((seg.length / seg.speed_limit) / norm.t_free_av)
            + weights.w_density * (density / norm.fleet))


def mean_free_time(net: Network) -> float:
    """Mean over ordered distinct station pairs of the minimum free-flow trip time."""
    ids = net.station_ids
    total = 0.0
    for a in ids:
        dist, _ = dijkstra(net, net.index[a],
                           lambda k: net.segments[k].length / net.segments[k].speed_limit)
        for b in ids:
            if b != a:
                if math.isinf(dist[net.index[b]]):
                    raise NetworkError(f"{b} unreachable from {a}")
                total += dist[net.index[b]]
    n = len(ids)
    return total / (n * (n - 1))


def plan_route(net: Network, src: str, dst: str, weights: CostWeights, norm: Normalizers,
               density=None) -> Route:
    """Minimum-cost route from ``src`` to ``dst``.

    ``density`` is an optional per-segment vehicle count snapshot; it only
    matters when ``weights.w_density > 0``.
    """
    if src == dst:
        raise NetworkError("route origin equals destination")
    if density is None or weights.w_density == 0:
        cost = lambda k: segment_cost(net, k, weights, norm)  # noqa: E731
    else:
        cost = lambda k: segment_cost(net, k, weights, norm, density[k])  # noqa: E731
    s, t = net.index[src], net.index[dst]
    dist, via = dijkstra(net, s, cost)
    if math.isinf(dist[t]):
        raise NetworkError(f"{dst} unreachable from {src}")
    path = []
    v = t
    while v != s:
        k = via[v]
        path.append(k)
        v = net.index[net.segments[k].src]
    path.reverse()
    length = sum(net.segments[k].length for k in path)
    return Route(src, dst, path, length, dist[t])


class RouteTable:
    """Static routes between all terminal pairs, planned once."""

    def __init__(self, net: Network, weights: CostWeights, norm: Normalizers):
        self.net = net
        self.weights = weights
        self.norm = norm
        self._routes: dict[tuple[str, str], Route] = {}
        ids = net.terminal_ids
        if weights.w_density == 0:
            for a in ids:
                for b in ids:
                    if a != b:
                        self._routes[a, b] = plan_route(net, a, b, weights, norm)

    def get(self, src: str, dst: str, density=None) -> Route:
        if self.weights.w_density > 0:
            return plan_route(self.net, src, dst, self.weights, self.norm, density)
        return self._routes[src, dst]
