"""Scenario configuration and its YAML representation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .city import build_city_reference, load_city
from .demand import (
    DEFAULT_ALIGHTING,
    DEFAULT_BOARDING,
    DemandError,
    OdmMatrix,
    Triangular,
    normalize_odm,
    odm2,
    odm4,
    random_odm,
    uniform_odm,
)
from .evm import REL_EB, REL_Q, EvmConfig, TaskParams, balancing_from_tag
from .network import Network, load_network
from .routing import CostWeights

DEFAULT_ODM = "random(7)"


@dataclass(frozen=True)
class DemandConfig:
    lambda_total: float = 100.0          # groups / hour
    tier_map: str | tuple = "auto"
    odm: str | tuple = DEFAULT_ODM
    boarding: Triangular = DEFAULT_BOARDING
    alighting: Triangular = DEFAULT_ALIGHTING


@dataclass(frozen=True)
class VehicleConfig:
    J: int = 48
    a_max: float = 2.0
    d_max: float = 2.0
    separation: float = 6.0
    v_road: float = 10.0
    v_highway: float = 15.0


@dataclass(frozen=True)
class SimConfig:
    warmup_s: float = 3600.0
    duration_s: float = 8 * 3600.0
    seed: int = 1


@dataclass(frozen=True)
class Scenario:
    network: str = "city"
    demand: DemandConfig = field(default_factory=DemandConfig)
    routing: CostWeights = field(default_factory=CostWeights)
    vehicles: VehicleConfig = field(default_factory=VehicleConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    evm: EvmConfig = field(default_factory=EvmConfig)
    tag: str | None = "1111"
    saturated: bool = False
    placement: str = "capacitors"       # or "stations"

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, sim=replace(self.sim, seed=seed))

    def with_tag(self, tag: str) -> "Scenario":
        bal = balancing_from_tag(tag, T_ND=self.evm.balancing.T_ND)
        return replace(self, tag=tag, evm=replace(self.evm, balancing=bal))

    def with_demand(self, lambda_total: float) -> "Scenario":
        return replace(self, demand=replace(self.demand, lambda_total=lambda_total))

    def with_fleet(self, J: int) -> "Scenario":
        return replace(self, vehicles=replace(self.vehicles, J=J))

    def with_balancing(self, **kw) -> "Scenario":
        return replace(self, tag=None if any(k.startswith("F_") for k in kw) else self.tag,
                       evm=replace(self.evm, balancing=replace(self.evm.balancing, **kw)))


def build_network(spec: str, base_dir: Path | None = None) -> Network:
    if spec == "city":
        return load_city()
    if spec == "city-builder":
        return build_city_reference()
    p = Path(spec)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return load_network(p)


def build_odm(spec, n: int) -> OdmMatrix:
    if not isinstance(spec, str):
        return normalize_odm(spec)
    if spec == "uniform":
        return uniform_odm(n)
    m = re.fullmatch(r"(random|odm2|odm4)\((\d+)\)", spec.strip())
    if not m:
        raise DemandError(f"unknown ODM spec {spec!r}")
    kind, seed = m.group(1), int(m.group(2))
    return {"random": random_odm, "odm2": odm2, "odm4": odm4}[kind](n, seed)


# --------------------------------------------------------------------------
# YAML


def _num(v):
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        return float(s)
    return float(v)


def _threshold(v, rel):
    if isinstance(v, str) and v.replace(" ", "") == rel:
        return rel
    return _num(v)


def _task(raw: dict, base: TaskParams) -> TaskParams:
    kw = {}
    for key in ("F_Q", "F_EB", "F_ND", "F_AI", "T_EV", "T_ND", "T"):
        if key in raw:
            kw[key] = _num(raw[key])
    if "T_Q" in raw:
        kw["T_Q"] = _threshold(raw["T_Q"], REL_Q)
    if "T_EB" in raw:
        kw["T_EB"] = _threshold(raw["T_EB"], REL_EB)
    return replace(base, **kw)


def scenario_from_dict(doc: dict) -> Scenario:
    doc = doc or {}
    d = doc.get("demand", {})
    demand = DemandConfig(
        lambda_total=_num(d.get("lambda_total", 100.0)),
        tier_map=d.get("tier_map", "auto") if isinstance(d.get("tier_map", "auto"), str)
        else tuple(d["tier_map"]),
        odm=d.get("odm", DEFAULT_ODM) if isinstance(d.get("odm", DEFAULT_ODM), str)
        else tuple(tuple(r) for r in d["odm"]),
        boarding=Triangular(*map(float, d.get("boarding", (4, 8, 20)))),
        alighting=Triangular(*map(float, d.get("alighting", (4, 6, 15)))),
    )
    r = doc.get("routing", {})
    routing = CostWeights(_num(r.get("w_length", 1.0)), _num(r.get("w_freetime", 1.0)),
                          _num(r.get("w_density", 0.0)))
    v = doc.get("vehicles", {})
    vehicles = VehicleConfig(
        J=int(v.get("J", 48)), a_max=_num(v.get("a_max", 2.0)), d_max=_num(v.get("d_max", 2.0)),
        separation=_num(v.get("separation", 6.0)), v_road=_num(v.get("v_road", 10.0)),
        v_highway=_num(v.get("v_highway", 15.0)),
    )
    s = doc.get("sim", {})
    sim = SimConfig(warmup_s=_num(s.get("warmup_s", 3600.0)),
                    duration_s=_num(s.get("duration_s", 8 * 3600.0)),
                    seed=int(s.get("seed", 1)))

    e = doc.get("evm", {})
    tag = e.get("tag", "1111")
    tag = None if tag is None else str(tag).zfill(4)
    base = EvmConfig()
    bal_raw = e.get("balancing", {})
    bal = balancing_from_tag(tag, T_ND=_num(bal_raw.get("T_ND", 1.0))) if tag else base.balancing
    if any(k in bal_raw for k in ("F_Q", "F_EB", "F_ND", "F_AI")):
        tag = None
    evm = EvmConfig(
        balancing=_task(bal_raw, bal),
        calling=_task(e.get("calling", {}), base.calling),
        expelling=_task(e.get("expelling", {}), base.expelling),
        withdrawing=_task(e.get("withdrawing", {}), base.withdrawing),
        balancing_period=_num(bal_raw.get("period_s", base.balancing_period)),
        withdraw_timeout=_num(e.get("withdrawing", {}).get("timeout_s", base.withdraw_timeout)),
        convention=e.get("convention", base.convention),
        expelling_enabled=bool(e.get("expelling", {}).get("enabled", True)),
        calling_enabled=bool(e.get("calling", {}).get("enabled", True)),
    )
    return Scenario(
        network=str(doc.get("network", "city")), demand=demand, routing=routing,
        vehicles=vehicles, sim=sim, evm=evm, tag=tag,
        saturated=bool(doc.get("saturated", False)),
        placement=str(doc.get("placement", "capacitors")),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        sc = scenario_from_dict(yaml.safe_load(fh))
    if sc.network not in ("city", "city-builder") and not Path(sc.network).is_absolute():
        sc = replace(sc, network=str(path.parent / sc.network))
    return sc


def _fmt(x):
    if isinstance(x, str):
        return x
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _task_dict(p: TaskParams) -> dict:
    return {k: _fmt(getattr(p, k)) for k in
            ("F_Q", "F_EB", "F_ND", "F_AI", "T_Q", "T_EB", "T_EV", "T_ND", "T")}


def scenario_to_dict(sc: Scenario) -> dict:
    d = sc.demand
    bal = _task_dict(sc.evm.balancing)
    bal["period_s"] = sc.evm.balancing_period
    wd = _task_dict(sc.evm.withdrawing)
    wd["timeout_s"] = _fmt(sc.evm.withdraw_timeout)
    evm = {"convention": sc.evm.convention, "balancing": bal,
           "calling": dict(_task_dict(sc.evm.calling), enabled=sc.evm.calling_enabled),
           "expelling": dict(_task_dict(sc.evm.expelling), enabled=sc.evm.expelling_enabled),
           "withdrawing": wd}
    if sc.tag:
        evm = {"tag": sc.tag, **evm}
        for k in ("F_Q", "F_EB", "F_ND", "F_AI"):
            del evm["balancing"][k]
    return {
        "network": sc.network,
        "demand": {
            "lambda_total": d.lambda_total,
            "tier_map": d.tier_map if isinstance(d.tier_map, str) else list(d.tier_map),
            "odm": d.odm if isinstance(d.odm, str) else [list(r) for r in d.odm],
            "boarding": [d.boarding.low, d.boarding.mode, d.boarding.high],
            "alighting": [d.alighting.low, d.alighting.mode, d.alighting.high],
        },
        "routing": {"w_length": sc.routing.w_length, "w_freetime": sc.routing.w_freetime,
                    "w_density": sc.routing.w_density},
        "vehicles": vars(sc.vehicles).copy(),
        "sim": vars(sc.sim).copy(),
        "evm": evm,
        "saturated": sc.saturated,
        "placement": sc.placement,
    }


def save_scenario(sc: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)
