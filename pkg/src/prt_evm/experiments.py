"""Seeded runs, ridership estimation and the parameter studies built on them."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

from .evm import BALANCING
from .metrics import RunSummary, aswt, awt, improvement, qc, rho
from .network import Network, shortest_distances
from .scenario import Scenario, build_network
from .sim import Simulation

TAG_BASE = "0000"
TAG_SUG = "1111"
HORIZON_LEVELS = (2.0, 1.0, 2.0 / 3.0, 0.0)
FACTOR_NAMES = ("F_EB", "F_Q", "F_ND", "F_AI")


def ten_tags() -> list[str]:
    """All off, all on, each factor alone, each factor left out."""
    one_on = ["".join("1" if j == i else "0" for j in range(4)) for i in range(4)]
    one_off = ["".join("0" if j == i else "1" for j in range(4)) for i in range(4)]
    return [TAG_BASE, TAG_SUG] + one_on + one_off


@lru_cache(maxsize=8)
def _network(spec: str) -> tuple[Network, object]:
    net = build_network(spec)
    return net, shortest_distances(net)


@dataclass
class RunResult:
    summary: RunSummary
    decisions: list
    events: list | None
    sim: Simulation = field(repr=False)


def run_experiment(scenario: Scenario, seed: int | None = None, *, M: float | None = None,
                   events: bool = False, audit: bool = False, backend: str | None = None,
                   net: Network | None = None) -> RunResult:
    """Warm up, run the measurement window, and summarize."""
    seed = scenario.sim.seed if seed is None else seed
    if net is None:
        net, table = _network(scenario.network)
    else:
        table = shortest_distances(net)
    t0 = time.perf_counter()
    sim = Simulation(scenario, net, seed, audit=audit, backend=backend, table=table,
                     event_log=[] if events else None)
    sim.run()
    st = sim.stats
    a = aswt(st.waits)
    lam = scenario.demand.lambda_total
    summary = RunSummary(
        ASWT=a, AWT=awt(st.waits), NET=st.net, ETM=st.etm_m / 1000.0, QC=qc(a, st.net),
        served_groups=st.served, lam=lam, rho=rho(lam, M) if M else math.nan,
        J=scenario.vehicles.J, tag=scenario.tag or "custom", seed=seed,
        wall_time=time.perf_counter() - t0)
    return RunResult(summary, sim.decision_log, sim.events, sim)


def estimate_ridership(scenario: Scenario, J: int | None = None, seed: int | None = None) -> float:
    """Completed full trips per hour with every station queue permanently nonempty."""
    sc = scenario if J is None else scenario.with_fleet(J)
    if sc.vehicles.J == 0:
        return 0.0
    sc = replace(sc, saturated=True)
    res = run_experiment(sc, seed)
    return res.sim.stats.served / (sc.sim.duration_s / 3600.0)


def mean_ridership(scenario: Scenario, J: int, seeds) -> float:
    vals = [estimate_ridership(scenario, J, s) for s in seeds]
    return sum(vals) / len(vals)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    tags: tuple = tuple(ten_tags())
    lambdas: tuple = (100.0,)
    fleets: tuple = (48,)
    replications: int = 5
    seed: int = 1
    overrides: tuple = ()       # (label, {balancing field: value}) pairs run next to the tags
    M: dict | None = None       # J -> maximum ridership, for rho

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    def seeds(self):
        return [self.seed + r for r in range(self.replications)]

    def cells(self):
        """(J, lambda, label, scenario) for every configuration in the cross product."""
        out = []
        for J in self.fleets:
            for lam in self.lambdas:
                sc = self.base.with_fleet(J).with_demand(lam)
                for tag in self.tags:
                    out.append((J, lam, tag, sc.with_tag(tag)))
                for label, kw in self.overrides:
                    v = sc.with_balancing(**kw)
                    out.append((J, lam, label, replace(v, tag=label)))
        return out


def _run_one(args):
    sc, seed, M = args
    return run_experiment(sc, seed, M=M).summary


def run_many(jobs, workers: int = 1) -> list[RunSummary]:
    """Run (scenario, seed, M) jobs, in parallel when ``workers > 1``; order preserved."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def sweep(spec: SweepSpec, workers: int = 1) -> list[RunSummary]:
    jobs = []
    for J, lam, _, sc in spec.cells():
        M = (spec.M or {}).get(J)
        for s in spec.seeds():
            jobs.append((sc, s, M))
    return run_many(jobs, workers)


@dataclass
class Cell:
    J: int
    lam: float
    tag: str
    ASWT: float
    AWT: float
    NET: float
    ETM: float
    QC: float
    rho: float
    runs: int


def aggregate(rows: list[RunSummary]) -> list[Cell]:
    """Per-(J, lambda, tag) means; QC is recomputed from the mean ASWT and NET."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.J, r.lam, r.tag), []).append(r)
    out = []
    for (J, lam, tag), rs in sorted(groups.items()):
        n = len(rs)
        A = math.fsum(r.ASWT for r in rs) / n
        N = math.fsum(r.NET for r in rs) / n
        out.append(Cell(J, lam, tag, A, math.fsum(r.AWT for r in rs) / n, N,
                        math.fsum(r.ETM for r in rs) / n, qc(A, N), rs[0].rho, n))
    return out


@dataclass
class VariantResult:
    J: int
    lam: float
    base: Cell
    sug: Cell | None
    best: Cell

    def improvements(self, which: str) -> dict:
        c = self.sug if which == "sug" else self.best
        return {k: improvement(getattr(self.base, k), getattr(c, k)) for k in ("ASWT", "NET", "ETM")}


def variants(cells: list[Cell]) -> list[VariantResult]:
    """t_base (0000), t_sug (1111) and t_best (minimum QC) for every (J, lambda)."""
    by = {}
    for c in cells:
        by.setdefault((c.J, c.lam), []).append(c)
    out = []
    for (J, lam), cs in sorted(by.items()):
        tags = {c.tag: c for c in cs}
        if TAG_BASE not in tags:
            continue
        best = min(cs, key=lambda c: (c.QC, c.ASWT, c.tag))
        out.append(VariantResult(J, lam, tags[TAG_BASE], tags.get(TAG_SUG), best))
    return out


# --------------------------------------------------------------------------
# studies


def horizon_study(base: Scenario, lambdas, J: int, seeds, levels=HORIZON_LEVELS,
                  workers: int = 1) -> dict:
    """Mean (ASWT, ETM) per (lambda, T_ND) with tag 1111; T_ND = 0 is the infinite horizon."""
    jobs, keys = [], []
    for lam in lambdas:
        sc = base.with_fleet(J).with_demand(lam).with_tag(TAG_SUG)
        for t_nd in levels:
            v = replace(sc, evm=replace(sc.evm, balancing=replace(sc.evm.balancing, T_ND=t_nd)))
            for s in seeds:
                jobs.append((v, s, None))
                keys.append((lam, t_nd))
    res = run_many(jobs, workers)
    acc: dict = {}
    for k, r in zip(keys, res):
        acc.setdefault(k, []).append(r)
    return {k: (sum(r.ASWT for r in rs) / len(rs), sum(r.ETM for r in rs) / len(rs), rs)
            for k, rs in acc.items()}


def sensitivity_variants(delta: float = 0.3) -> list[tuple[str, dict]]:
    """Each tag-1111 factor scaled by 1 - delta and 1 + delta: eight variants."""
    sug = Scenario().with_tag(TAG_SUG).evm.balancing
    out = []
    for name in FACTOR_NAMES:
        for sign, f in (("-", 1 - delta), ("+", 1 + delta)):
            out.append((f"{name}{sign}{round(delta * 100)}%", {name: getattr(sug, name) * f}))
    return out


def sensitivity_study(base: Scenario, cases, seeds, delta: float = 0.3, workers: int = 1):
    """Rows (J, lambda, label, ASWT, NET, ASWT growth %, NET growth %) against tag 1111."""
    rows = []
    for J, lam in cases:
        sc = base.with_fleet(J).with_demand(lam).with_tag(TAG_SUG)
        labels = [("t_sug", {})] + sensitivity_variants(delta)
        jobs, keys = [], []
        for label, kw in labels:
            v = sc.with_balancing(**kw) if kw else sc
            for s in seeds:
                jobs.append((replace(v, tag=label if kw else TAG_SUG), s, None))
                keys.append(label)
        res = run_many(jobs, workers)
        means = {}
        for k, r in zip(keys, res):
            means.setdefault(k, []).append(r)
        ref = {k: (sum(r.ASWT for r in rs) / len(rs), sum(r.NET for r in rs) / len(rs))
               for k, rs in means.items()}
        a0, n0 = ref["t_sug"]
        for label, _ in labels:
            a, n = ref[label]
            rows.append((J, lam, label, a, n, -improvement(a0, a), -improvement(n0, n)))
    return rows


def fleet_sizing(base: Scenario, lam: float, threshold: float = 300.0, J_min: int = 2,
                 J_max: int = 96, step: int = 2, seeds=(1,)) -> tuple[int | None, list]:
    """Smallest J (scanning in ``step``) whose mean ASWT is below ``threshold``."""
    trace = []
    sc = base.with_demand(lam)
    for J in range(J_min, J_max + 1, step):
        rs = [run_experiment(sc.with_fleet(J), s).summary for s in seeds]
        a = sum(r.ASWT for r in rs) / len(rs)
        trace.append((J, a))
        if a < threshold:
            return J, trace
    return None, trace


def odm_study(base: Scenario, odms, lambdas, J: int, seeds, workers: int = 1):
    """Mean ASWT per (odm, lambda, tag) for tags 0000 and 1111."""
    jobs, keys = [], []
    for odm in odms:
        for lam in lambdas:
            for tag in (TAG_BASE, TAG_SUG):
                sc = replace(base, demand=replace(base.demand, odm=odm))
                sc = sc.with_fleet(J).with_demand(lam).with_tag(tag)
                for s in seeds:
                    jobs.append((sc, s, None))
                    keys.append((odm, lam, tag))
    res = run_many(jobs, workers)
    acc: dict = {}
    for k, r in zip(keys, res):
        acc.setdefault(k, []).append(r.ASWT)
    return {k: sum(v) / len(v) for k, v in acc.items()}


def decision_counts(result: RunResult) -> dict:
    return dict(result.sim.stats.decisions)


def balancing_decisions(result: RunResult) -> int:
    return result.sim.stats.decisions.get(BALANCING, 0)
