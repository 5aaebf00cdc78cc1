# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Sector-level vehicle movement, compiled.

Mirrors ``_track_py.Track`` operation for operation (same arithmetic in the
same order), so both backends emit identical notification streams.
"""

from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free

cdef enum:
    OFF = 0
    MOVING = 1
    BLOCKED = 2
    AT_END = 3

ENTERED = 1
APPROACH = 2
ARRIVED = 3


cdef class Track:
    cdef readonly str backend
    cdef readonly int n_seg, n_sectors, n_veh, gap, max_route
    cdef readonly double sector_length, a_max, d_max
    cdef readonly long long n_events
    cdef int *seg_sectors
    cdef double *seg_speed
    cdef int *offset
    cdef int *occ
    cdef int *wait_head
    cdef int *wait_next
    cdef int *seg_load
    cdef int *route
    cdef int *route_len
    cdef int *rpos
    cdef int *idx
    cdef int *ahead
    cdef double *speed
    cdef int *state
    cdef double *wait_since
    cdef int *blocked_on
    cdef int *tmp
    # binary heap keyed by (time, seq)
    cdef double *h_time
    cdef long long *h_seq
    cdef int *h_vid
    cdef int h_size
    cdef long long seq
    # pending notifications (FIFO ring)
    cdef double *n_time
    cdef int *n_kind
    cdef int *n_vid
    cdef int n_head, n_count, n_cap

    def __cinit__(self, seg_sectors, seg_speed, double sector_length, int gap,
                  double a_max, double d_max, int n_vehicles):
        cdef int k, acc, i, n
        self.backend = "cython"
        self.n_seg = len(seg_sectors)
        self.n_veh = n_vehicles
        self.gap = gap
        self.sector_length = sector_length
        self.a_max = a_max
        self.d_max = d_max
        self.max_route = self.n_seg if self.n_seg > 0 else 1
        self.n_events = 0
        self.seq = 0
        self.h_size = 0
        self.n_head = 0
        self.n_count = 0
        self.n_cap = 4 * n_vehicles + 8

        self.seg_sectors = <int *> malloc(self.n_seg * sizeof(int))
        self.seg_speed = <double *> malloc(self.n_seg * sizeof(double))
        self.offset = <int *> malloc(self.n_seg * sizeof(int))
        self.seg_load = <int *> malloc(self.n_seg * sizeof(int))
        acc = 0
        for k in range(self.n_seg):
            self.seg_sectors[k] = int(seg_sectors[k])
            self.seg_speed[k] = float(seg_speed[k])
            self.offset[k] = acc
            self.seg_load[k] = 0
            acc += self.seg_sectors[k]
        self.n_sectors = acc

        self.occ = <int *> malloc(acc * sizeof(int))
        self.wait_head = <int *> malloc(acc * sizeof(int))
        for i in range(acc):
            self.occ[i] = -1
            self.wait_head[i] = -1

        n = n_vehicles if n_vehicles > 0 else 1
        self.wait_next = <int *> malloc(n * sizeof(int))
        self.route = <int *> malloc(n * self.max_route * sizeof(int))
        self.route_len = <int *> malloc(n * sizeof(int))
        self.rpos = <int *> malloc(n * sizeof(int))
        self.idx = <int *> malloc(n * sizeof(int))
        self.ahead = <int *> malloc(n * sizeof(int))
        self.speed = <double *> malloc(n * sizeof(double))
        self.state = <int *> malloc(n * sizeof(int))
        self.wait_since = <double *> malloc(n * sizeof(double))
        self.blocked_on = <int *> malloc(n * sizeof(int))
        self.tmp = <int *> malloc(n * sizeof(int))
        self.h_time = <double *> malloc((n + 1) * sizeof(double))
        self.h_seq = <long long *> malloc((n + 1) * sizeof(long long))
        self.h_vid = <int *> malloc((n + 1) * sizeof(int))
        self.n_time = <double *> malloc(self.n_cap * sizeof(double))
        self.n_kind = <int *> malloc(self.n_cap * sizeof(int))
        self.n_vid = <int *> malloc(self.n_cap * sizeof(int))
        for i in range(n):
            self.wait_next[i] = -1
            self.route_len[i] = 0
            self.rpos[i] = 0
            self.idx[i] = -1
            self.ahead[i] = 0
            self.speed[i] = 0.0
            self.state[i] = OFF
            self.wait_since[i] = 0.0
            self.blocked_on[i] = -1

    def __dealloc__(self):
        free(self.seg_sectors); free(self.seg_speed); free(self.offset); free(self.seg_load)
        free(self.occ); free(self.wait_head); free(self.wait_next)
        free(self.route); free(self.route_len); free(self.rpos); free(self.idx)
        free(self.ahead); free(self.speed); free(self.state); free(self.wait_since)
        free(self.blocked_on); free(self.tmp)
        free(self.h_time); free(self.h_seq); free(self.h_vid)
        free(self.n_time); free(self.n_kind); free(self.n_vid)

    # ------------------------------------------------------------------ api

    def set_route(self, int vid, route):
        cdef int j, total = 0
        if self.state[vid] != OFF:
            raise RuntimeError(f"vehicle {vid} is on the track")
        if len(route) > self.max_route:
            raise ValueError("route longer than the segment count")
        for j in range(len(route)):
            self.route[vid * self.max_route + j] = int(route[j])
            total += self.seg_sectors[int(route[j])]
        self.route_len[vid] = len(route)
        self.rpos[vid] = 0
        self.idx[vid] = -1
        self.ahead[vid] = total
        self.speed[vid] = 0.0

    def enter(self, int vid, double t):
        if self.state[vid] != OFF or self.route_len[vid] == 0:
            raise RuntimeError(f"vehicle {vid} cannot enter")
        self.state[vid] = MOVING
        self._push(t, vid)

    def remove(self, int vid, double t):
        cdef int k
        if self.state[vid] != AT_END:
            raise RuntimeError(f"vehicle {vid} is not at the end of its route")
        k = self.route[vid * self.max_route + self.rpos[vid]]
        self._vacate(self.offset[k] + self.idx[vid], t)
        self.seg_load[k] -= 1
        self.state[vid] = OFF
        self.route_len[vid] = 0
        self.idx[vid] = -1

    def next_time(self):
        if self.n_count > 0:
            return self.n_time[self.n_head]
        if self.h_size > 0:
            return self.h_time[0]
        return INFINITY

    def step(self, double t_limit):
        cdef double t
        cdef int vid
        while self.n_count == 0:
            if self.h_size == 0 or self.h_time[0] > t_limit:
                return None
            t = self.h_time[0]
            vid = self.h_vid[0]
            self._pop()
            self.n_events += 1
            self._move(vid, t)
        t = self.n_time[self.n_head]
        kind = self.n_kind[self.n_head]
        vid = self.n_vid[self.n_head]
        self.n_head = (self.n_head + 1) % self.n_cap
        self.n_count -= 1
        return (t, kind, vid)

    def vehicle(self, int vid):
        cdef int seg = -1
        if self.route_len[vid] > 0 and self.idx[vid] >= 0:
            seg = self.route[vid * self.max_route + self.rpos[vid]]
        return self.state[vid], seg, self.idx[vid], self.speed[vid]

    def segment_load(self):
        return [self.seg_load[k] for k in range(self.n_seg)]

    def occupied(self):
        cdef int k, i, v
        out = []
        for k in range(self.n_seg):
            for i in range(self.seg_sectors[k]):
                v = self.occ[self.offset[k] + i]
                if v >= 0:
                    out.append((k, i, v))
        return out

    # ------------------------------------------------------------ internals

    cdef inline bint _less(self, int a, int b):
        if self.h_time[a] < self.h_time[b]:
            return True
        if self.h_time[a] > self.h_time[b]:
            return False
        return self.h_seq[a] < self.h_seq[b]

    cdef inline void _swap(self, int a, int b):
        cdef double t = self.h_time[a]
        cdef long long s = self.h_seq[a]
        cdef int v = self.h_vid[a]
        self.h_time[a] = self.h_time[b]
        self.h_seq[a] = self.h_seq[b]
        self.h_vid[a] = self.h_vid[b]
        self.h_time[b] = t
        self.h_seq[b] = s
        self.h_vid[b] = v

    cdef void _push(self, double t, int vid):
        cdef int i = self.h_size
        cdef int parent
        self.h_time[i] = t
        self.h_seq[i] = self.seq
        self.h_vid[i] = vid
        self.seq += 1
        self.h_size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if self._less(i, parent):
                self._swap(i, parent)
                i = parent
            else:
                break

    cdef void _pop(self):
        cdef int i = 0, l, r, m
        self.h_size -= 1
        if self.h_size == 0:
            return
        self.h_time[0] = self.h_time[self.h_size]
        self.h_seq[0] = self.h_seq[self.h_size]
        self.h_vid[0] = self.h_vid[self.h_size]
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < self.h_size and self._less(l, m):
                m = l
            if r < self.h_size and self._less(r, m):
                m = r
            if m == i:
                break
            self._swap(i, m)
            i = m

    cdef void _note(self, double t, int kind, int vid):
        cdef int pos = (self.n_head + self.n_count) % self.n_cap
        self.n_time[pos] = t
        self.n_kind[pos] = kind
        self.n_vid[pos] = vid
        self.n_count += 1

    cdef void _vacate(self, int cell, double t):
        cdef int n = 0, v, a, b, j
        self.occ[cell] = -1
        v = self.wait_head[cell]
        if v < 0:
            return
        while v >= 0:
            self.tmp[n] = v
            n += 1
            v = self.wait_next[v]
        self.wait_head[cell] = -1
        # insertion sort by (wait_since, vid)
        for a in range(1, n):
            v = self.tmp[a]
            b = a - 1
            while b >= 0 and (self.wait_since[self.tmp[b]] > self.wait_since[v] or
                              (self.wait_since[self.tmp[b]] == self.wait_since[v] and self.tmp[b] > v)):
                self.tmp[b + 1] = self.tmp[b]
                b -= 1
            self.tmp[b + 1] = v
        for j in range(n):
            v = self.tmp[j]
            self.wait_next[v] = -1
            self.blocked_on[v] = -1
            self.state[v] = MOVING
            self._push(t, v)

    cdef void _move(self, int vid, double t):
        cdef int *route = self.route + vid * self.max_route
        cdef int nr = self.route_len[vid]
        cdef int rp = self.rpos[vid]
        cdef int i = self.idx[vid]
        cdef int j, crp, ci, cell, k
        cdef bint entering, new_segment
        cdef double d, v0, v1, va, vb, vs, lim, to_end, dt

        if self.ahead[vid] == 0:
            self.state[vid] = AT_END
            self.speed[vid] = 0.0
            self._note(t, ARRIVED, vid)
            return

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
                # append to the waiter list (order is re-sorted on wake)
                self.wait_next[vid] = self.wait_head[cell]
                self.wait_head[cell] = vid
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
            self._note(t, ENTERED, vid)
        if new_segment and rp == nr - 1:
            self._note(t, APPROACH, vid)

        d = self.sector_length
        v0 = self.speed[vid]
        v1 = self.seg_speed[k]
        va = sqrt(v0 * v0 + 2.0 * self.a_max * d)
        if va < v1:
            v1 = va
        vb = sqrt(2.0 * self.d_max * (self.ahead[vid] * d))
        if vb < v1:
            v1 = vb
        if rp + 1 < nr:
            lim = self.seg_speed[route[rp + 1]]
            if lim < v1:
                to_end = (self.seg_sectors[k] - 1 - i) * d
                vs = sqrt(lim * lim + 2.0 * self.d_max * to_end)
                if vs < v1:
                    v1 = vs
        if v0 + v1 > 0.0:
            dt = 2.0 * d / (v0 + v1)
        else:
            dt = sqrt(2.0 * d * (1.0 / self.a_max + 1.0 / self.d_max))
        self.speed[vid] = v1
        self._push(t + dt, vid)
