"""Brute-force reference implementations, written from the definitions.

Nothing here imports the code under test beyond plain data containers.
"""

import math

import numpy as np


def rms(values):
    a = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(a * a))) if a.size else 0.0


def features(s):
    """(uncovered queue, free berths after accounting, 1/PI) of a snapshot."""
    return (s.Q - s.L - s.Z, s.H - s.K + s.Q - s.Z, 1.0 / s.PI)


def score(s, nd, F):
    q, eb, ai = features(s)
    return float(np.dot(F, [q, eb, nd, ai]))


def score_plain(s, nd, F):
    """Left-to-right evaluation, so exact ties stay exact."""
    return F[0] * (s.Q - s.L - s.Z) + F[1] * (s.H - s.K + s.Q - s.Z) + F[2] * nd + F[3] / s.PI


def frac(s):
    return (s.L + s.Z - s.Q) / s.H


def t_q(p, H):
    return -H + 1 if p.T_Q == "-H+1" else p.T_Q


def t_eb(p, H):
    return 1.0 / H if p.T_EB == "1/H" else p.T_EB


def cond4(x, i, convention, x_source):
    if convention == "paper_literal":
        return frac(i) - frac(x)
    src, dst = (x, i) if x_source else (i, x)
    if convention == "source_minus_destination":
        return frac(src) - frac(dst)
    return (src.L + src.Z - src.Q - 1) / src.H - (dst.L + dst.Z - dst.Q + 1) / dst.H


def eligible(x, i, nd, p, convention, x_source):
    d = i if x_source else x
    s = x if x_source else i
    # garages carry no demand: a garage source skips the fraction test
    # unless the literal convention is requested
    frac_ok = ((s.is_capacitor and convention != "paper_literal")
               or cond4(x, i, convention, x_source) >= p.T_EV)
    return (d.Q - d.L - d.Z >= t_q(p, d.H)
            and (d.H - d.K + d.Q - d.Z) / d.H >= t_eb(p, d.H)
            and nd >= p.T_ND
            and frac_ok)


def floyd_warshall(n, edges):
    """All-pairs shortest path over (u, v, w) edges where terminals may not be transited.

    ``n`` nodes; ``edges`` already exclude arcs leaving a terminal unless the
    caller handles sources separately (see ``terminal_distances``).
    """
    D = np.full((n, n), math.inf)
    np.fill_diagonal(D, 0.0)
    for u, v, w in edges:
        D[u, v] = min(D[u, v], w)
    for k in range(n):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def terminal_distances(net):
    """Terminal-to-terminal distances where no other terminal may be passed through."""
    ids = [n.id for n in net.nodes]
    idx = {v: i for i, v in enumerate(ids)}
    term = {n.id for n in net.nodes if n.is_terminal}
    n = len(ids)
    out = {}
    inner = [(idx[s.src], idx[s.dst], s.length) for s in net.segments if s.src not in term]
    Dinner = floyd_warshall(n, inner)
    for a in term:
        best = {}
        for s in net.segments:
            if s.src != a:
                continue
            for b in term:
                if b == a:
                    continue
                d = s.length + Dinner[idx[s.dst], idx[b]]
                best[b] = min(best.get(b, math.inf), d)
        for b, d in best.items():
            out[a, b] = d
    return out


def select_target(x, task, snaps, dist, d_av, p, convention):
    """Brute force over every node: returns (target, score) or None."""
    x_source = task != "C"
    stations = [k for k, s in snaps.items() if not s.is_capacitor]
    caps = [k for k, s in snaps.items() if s.is_capacitor]
    pool = {"B": stations, "C": stations + caps, "E": stations + caps, "W": caps}[task]
    sx = snaps[x]
    if x_source and sx.L < 1:
        return None
    best = None
    for i in sorted(pool):
        if i == x:
            continue
        d = dist[x, i] if x_source else dist[i, x]
        nd = d_av / d
        if p.T_ND != 0 and nd < p.T_ND:
            continue
        si = snaps[i]
        if not x_source and si.L < 1:
            continue
        if not eligible(sx, si, nd, p, convention, x_source):
            continue
        sc = score_plain(si if x_source else sx, nd, p.factors)
        key = (-sc, d, i)
        if best is None or key < best[0]:
            best = (key, i, sc)
    if best is None or best[2] < p.T:
        return None
    return best[1], best[2]
