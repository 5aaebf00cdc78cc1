"""Sector-level vehicle movement, pure Python.

Reference implementation of the track kernel. ``_track.pyx`` mirrors it
operation for operation; both must produce identical event sequences.

A vehicle occupies one sector. Its pending event fires when it has
finished traversing that sector. It then crosses into the next sector of
its route if the next ``gap`` sectors are free; otherwise it stops and
subscribes to the first occupied sector, which wakes it when vacated.
"""

import heapq
import math

OFF = 0
MOVING = 1
BLOCKED = 2
AT_END = 3

ENTERED = 1   # left the exit buffer and occupies the first sector
APPROACH = 2  # entered the final segment of its route
ARRIVED = 3   # reached the end of its route; holds its sector until removed


class Track:
    backend = "python"

    def __init__(self, seg_sectors, seg_speed, sector_length, gap, a_max, d_max, n_vehicles):
        self.n_seg = len(seg_sectors)
        self.seg_sectors = [int(s) for s in seg_sectors]
        self.seg_speed = [float(v) for v in seg_speed]
        self.offset = []
        acc = 0
        for s in self.seg_sectors:
            self.offset.append(acc)
            acc += s
        self.n_sectors = acc
        self.sector_length = float(sector_length)
        self.gap = int(gap)
        self.a_max = float(a_max)
        self.d_max = float(d_max)
        self.n_veh = int(n_vehicles)

        self.occ = [-1] * self.n_sectors
        self.waiters = [[] for _ in range(self.n_sectors)]
        self.seg_load = [0] * self.n_seg

        n = self.n_veh
        self.route = [[] for _ in range(n)]
        self.rpos = [0] * n
        self.idx = [-1] * n
        self.ahead = [0] * n
        self.speed = [0.0] * n
        self.state = [OFF] * n
        self.wait_since = [0.0] * n
        self.blocked_on = [-1] * n

        self.heap = []
        self.seq = 0
        self.notes = []
        self.n_events = 0

    # ------------------------------------------------------------------ api

    def set_route(self, vid, route):
        if self.state[vid] != OFF:
            raise RuntimeError(f"vehicle {vid} is on the track")
        self.route[vid] = [int(k) for k in route]
        self.rpos[vid] = 0
        self.idx[vid] = -1
        self.ahead[vid] = sum(self.seg_sectors[k] for k in self.route[vid])
        self.speed[vid] = 0.0

    def enter(self, vid, t):
        if self.state[vid] != OFF or not self.route[vid]:
            raise RuntimeError(f"vehicle {vid} cannot enter")
        self.state[vid] = MOVING
        self._push(t, vid)

    def remove(self, vid, t):
        if self.state[vid] != AT_END:
            raise RuntimeError(f"vehicle {vid} is not at the end of its route")
        k = self.route[vid][self.rpos[vid]]
        self._vacate(self.offset[k] + self.idx[vid], t)
        self.seg_load[k] -= 1
        self.state[vid] = OFF
        self.route[vid] = []
        self.idx[vid] = -1

    def next_time(self):
        if self.notes:
            return self.notes[0][0]
        return self.heap[0][0] if self.heap else math.inf

    def step(self, t_limit):
        """Advance until a notification or until the next event is later than ``t_limit``."""
        notes = self.notes
        heap = self.heap
        while not notes:
            if not heap or heap[0][0] > t_limit:
                return None
            t, _, vid = heapq.heappop(heap)
            self.n_events += 1
            self._move(vid, t)
        return notes.pop(0)

    def vehicle(self, vid):
        r = self.route[vid]
        seg = r[self.rpos[vid]] if r and self.idx[vid] >= 0 else -1
        return self.state[vid], seg, self.idx[vid], self.speed[vid]

    def segment_load(self):
        return list(self.seg_load)

    def occupied(self):
        """(segment, sector, vehicle) for every occupied sector."""
        out = []
        for k in range(self.n_seg):
            base = self.offset[k]
            for i in range(self.seg_sectors[k]):
                v = self.occ[base + i]
                if v >= 0:
                    out.append((k, i, v))
        return out

    # ------------------------------------------------------------ internals

    def _push(self, t, vid):
        heapq.heappush(self.heap, (t, self.seq, vid))
        self.seq += 1

    def _vacate(self, cell, t):
        self.occ[cell] = -1
        w = self.waiters[cell]
        if w:
            self.waiters[cell] = []
            w.sort(key=lambda v: (self.wait_since[v], v))
            for v in w:
                self.blocked_on[v] = -1
                self.state[v] = MOVING
                self._push(t, v)

    def _move(self, vid, t):
        if self.ahead[vid] == 0:
            self.state[vid] = AT_END
            self.speed[vid] = 0.0
            self.notes.append((t, ARRIVED, vid))
            return

        route = self.route[vid]
        nr = len(route)
        rp = self.rpos[vid]
        i = self.idx[vid]
        # look ahead up to `gap` sectors along the route
        j = 0
        crp = rp
        ci = i
        while j < self.gap:
            ci += 1
            if ci >= self.seg_sectors[route[crp]]:
                crp += 1
                if crp >= nr:
                    break
                ci = 0
            cell = self.offset[route[crp]] + ci
            if self.occ[cell] >= 0:
                self.state[vid] = BLOCKED
                self.speed[vid] = 0.0
                self.wait_since[vid] = t
                self.blocked_on[vid] = cell
                self.waiters[cell].append(vid)
                return
            j += 1

        entering = i < 0
        if not entering:
            self._vacate(self.offset[route[rp]] + i, t)
        i += 1
        new_segment = entering
        if i >= self.seg_sectors[route[rp]]:
            self.seg_load[route[rp]] -= 1
            rp += 1
            i = 0
            new_segment = True
        k = route[rp]
        if new_segment:
            self.seg_load[k] += 1
        self.occ[self.offset[k] + i] = vid
        self.rpos[vid] = rp
        self.idx[vid] = i
        self.ahead[vid] -= 1
        if entering:
            self.notes.append((t, ENTERED, vid))
        if new_segment and rp == nr - 1:
            self.notes.append((t, APPROACH, vid))

        # kinematics over the sector just entered
        d = self.sector_length
        v0 = self.speed[vid]
        v1 = self.seg_speed[k]
        va = math.sqrt(v0 * v0 + 2.0 * self.a_max * d)
        if va < v1:
            v1 = va
        vb = math.sqrt(2.0 * self.d_max * (self.ahead[vid] * d))
        if vb < v1:
            v1 = vb
        if rp + 1 < nr:
            lim = self.seg_speed[route[rp + 1]]
            if lim < v1:
                to_end = (self.seg_sectors[k] - 1 - i) * d
                vs = math.sqrt(lim * lim + 2.0 * self.d_max * to_end)
                if vs < v1:
                    v1 = vs
        if v0 + v1 > 0.0:
            dt = 2.0 * d / (v0 + v1)
        else:
            dt = math.sqrt(2.0 * d * (1.0 / self.a_max + 1.0 / self.d_max))
        self.speed[vid] = v1
        self._push(t + dt, vid)
