"""City-like reference network.

Downtown stations A-D sit on short loops inside a two-way highway ring of
3 km diameter, suburban stations E-L on longer loops outside it, and one
capacitor shares each downtown loop. Every loop hangs off the ring at its
own interchange and is reachable from both ring directions. Stations and
capacitors are offline (fork -> node -> join, with a bypass) so through
traffic never passes a berth.
"""

from __future__ import annotations

import math
from importlib import resources

from .network import (
    CAPACITOR,
    FORK,
    HIGHWAY,
    JOIN,
    ROAD,
    STATION,
    Network,
    Node,
    Segment,
    load_network,
)

RING_DIAMETER = 3000.0
HIGHWAY_SPEED = 15.0
ROAD_SPEED = 10.0

# loop geometry, meters
RAMP = 160.0          # ring fork -> loop merge, loop split -> ring join
FEEDER = 200.0        # loop merge -> first siding, last siding -> loop split
SIDING = 60.0         # siding fork -> terminal, terminal -> siding join
BYPASS = 80.0
LINK_OUTER = 450.0    # between the two sidings of a suburban loop
LINK_INNER = 250.0
RING_GAP_DEG = 2.0    # angular offset of a ring fork/join from its interchange

STATION_BERTHS = 6
ENTRY_BUFFER = 3
EXIT_BUFFER = 2
CAPACITOR_BERTHS = 24


def build_city_reference(
    station_berths: int = STATION_BERTHS,
    entry_buffer: int = ENTRY_BUFFER,
    exit_buffer: int = EXIT_BUFFER,
    capacitor_berths: int = CAPACITOR_BERTHS,
    sector_length: float = 2.0,
) -> Network:
    R = RING_DIAMETER / 2
    nodes: list[Node] = []
    segs: list[Segment] = []

    def polar(radius, deg):
        rad = math.radians(deg)
        return radius * math.cos(rad), radius * math.sin(rad)

    def add(node_id, kind, radius, deg, **kw):
        x, y = polar(radius, deg)
        nodes.append(Node(node_id, kind, x=x, y=y, **kw))

    def road(a, b, length):
        segs.append(Segment(a, b, ROAD, length, ROAD_SPEED))

    # eight interchanges; even ones carry suburban loops, odd ones downtown loops
    suburbs = iter("EFGHIJKL")
    downtown = iter("ABCD")
    loops = []
    for k in range(8):
        deg = 45.0 * k + 22.5
        if k % 2 == 0:
            loops.append((k, deg, [next(suburbs), next(suburbs)], [], +1))
        else:
            loops.append((k, deg, [next(downtown)], [f"G{k // 2 + 1}"], -1))

    ring_ccw = []  # (angle, node id) in counter-clockwise travel order
    ring_cw = []
    for k, deg, stations, caps, side in loops:
        add(f"Fccw{k}", FORK, R, deg - RING_GAP_DEG)
        add(f"Jccw{k}", JOIN, R, deg + RING_GAP_DEG)
        add(f"Fcw{k}", FORK, R, deg + RING_GAP_DEG)
        add(f"Jcw{k}", JOIN, R, deg - RING_GAP_DEG)
        ring_ccw += [(deg - RING_GAP_DEG, f"Fccw{k}"), (deg + RING_GAP_DEG, f"Jccw{k}")]
        ring_cw += [(deg + RING_GAP_DEG, f"Fcw{k}"), (deg - RING_GAP_DEG, f"Jcw{k}")]

        # loop: merge from both ring directions, sidings, split back to both
        r_loop = R + side * 250.0
        add(f"M{k}", JOIN, R + side * 120.0, deg - 8)
        add(f"X{k}", FORK, R + side * 120.0, deg + 8)
        road(f"Fccw{k}", f"M{k}", RAMP)
        road(f"Fcw{k}", f"M{k}", RAMP)
        road(f"X{k}", f"Jcw{k}", RAMP)
        road(f"X{k}", f"Jccw{k}", RAMP)

        terminals = [(s, STATION) for s in stations] + [(g, CAPACITOR) for g in caps]
        spread = 14.0
        prev = f"M{k}"
        for t, (tid, kind) in enumerate(terminals):
            at = deg + (t - (len(terminals) - 1) / 2) * spread
            add(f"SF_{tid}", FORK, r_loop, at - 3)
            add(f"SJ_{tid}", JOIN, r_loop, at + 3)
            if kind == STATION:
                add(tid, STATION, r_loop + side * 60.0, at, berths=station_berths,
                    entry_buffer=entry_buffer, exit_buffer=exit_buffer)
            else:
                add(tid, CAPACITOR, r_loop + side * 60.0, at, berths=capacitor_berths)
            if t == 0:
                road(prev, f"SF_{tid}", FEEDER)
            else:
                road(prev, f"SF_{tid}", LINK_OUTER if side > 0 else LINK_INNER)
            road(f"SF_{tid}", tid, SIDING)
            road(tid, f"SJ_{tid}", SIDING)
            road(f"SF_{tid}", f"SJ_{tid}", BYPASS)
            prev = f"SJ_{tid}"
        road(prev, f"X{k}", FEEDER)

    def close_ring(points, ccw):
        points = sorted(points, key=lambda p: p[0], reverse=not ccw)
        for (a0, n0), (a1, n1) in zip(points, points[1:] + points[:1]):
            arc = (a1 - a0) % 360.0 if ccw else (a0 - a1) % 360.0
            segs.append(Segment(n0, n1, HIGHWAY, R * math.radians(arc), HIGHWAY_SPEED))

    close_ring(ring_ccw, ccw=True)
    close_ring(ring_cw, ccw=False)
    nodes.sort(key=lambda n: n.id if n.is_terminal else "~")
    return Network(nodes=nodes, segments=segs, sector_length=sector_length, name="city")


def build_ring(terminals, gaps, *, spur: float = 20.0, berths: int = 4, entry_buffer: int = 2,
               exit_buffer: int = 1, capacitor_berths: int = 8,
               sector_length: float = 2.0) -> Network:
    """One-way road loop with an offline terminal at each stop.

    ``terminals`` lists ``(id, kind)`` pairs in loop order; ``gaps[k]`` is the
    main-line length from stop k to stop k+1 (wrapping). Each stop is a fork,
    a short spur through the terminal, and a join, with a bypass of the same
    length as the two spur segments together.
    """
    if len(terminals) != len(gaps) or len(terminals) < 2:
        raise ValueError("need one gap per terminal and at least two terminals")
    nodes: list[Node] = []
    segs: list[Segment] = []
    for tid, kind in terminals:
        if kind == STATION:
            nodes.append(Node(tid, STATION, berths, entry_buffer, exit_buffer))
        else:
            nodes.append(Node(tid, CAPACITOR, capacitor_berths))
        nodes.append(Node(f"F_{tid}", FORK))
        nodes.append(Node(f"J_{tid}", JOIN))
        segs.append(Segment(f"F_{tid}", tid, ROAD, spur, ROAD_SPEED))
        segs.append(Segment(tid, f"J_{tid}", ROAD, spur, ROAD_SPEED))
        segs.append(Segment(f"F_{tid}", f"J_{tid}", ROAD, 2 * spur, ROAD_SPEED))
    n = len(terminals)
    for k, (tid, _) in enumerate(terminals):
        nxt = terminals[(k + 1) % n][0]
        segs.append(Segment(f"J_{tid}", f"F_{nxt}", ROAD, float(gaps[k]), ROAD_SPEED))
    return Network(nodes=nodes, segments=segs, sector_length=sector_length, name="ring")


def city_net_path():
    return resources.files("prt_evm") / "data" / "city.net"


def load_city() -> Network:
    """The shipped ``city.net`` file (same content as the builder's default)."""
    with resources.as_file(city_net_path()) as p:
        return load_network(p)
