"""Command line: prt-evm validate|simulate|ridership|sweep|report."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import report
from .experiments import SweepSpec, estimate_ridership, run_experiment, sweep, ten_tags
from .network import NetworkError, load_network, validate_network
from .scenario import load_scenario, scenario_from_dict
from .sim import SimError

SEED_ENV = "PRT_EVM_SEED"


def _default_seed():
    v = os.environ.get(SEED_ENV)
    return int(v) if v else None


def cmd_validate(args) -> int:
    try:
        net = load_network(args.network)
    except (OSError, NetworkError, KeyError, TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    problems = validate_network(net)
    for p in problems:
        print(p)
    if problems:
        return 1
    print(f"{args.network}: ok ({len(net.nodes)} nodes, {len(net.segments)} segments, "
          f"{net.total_length():.1f} m)")
    return 0


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else sc.sim.seed
    if args.duration is not None:
        sc = replace(sc, sim=replace(sc.sim, duration_s=args.duration))
    res = run_experiment(sc, seed, events=args.events, M=args.M)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_summary([res.summary], out / "summary.csv")
    report.write_decisions(res.decisions, out / "decisions.csv")
    if args.events:
        report.write_events(res.events, out / "events.csv.gz")
    s = res.summary
    print(f"ASWT={s.ASWT:.2f}s AWT={s.AWT:.2f}s NET={s.NET} ETM={s.ETM:.2f}km "
          f"QC={s.QC:.1f} served={s.served_groups}")
    return 0


def cmd_ridership(args) -> int:
    sc = load_scenario(args.scenario)
    J = args.J if args.J is not None else sc.vehicles.J
    seeds = [args.seed + k for k in range(args.seeds)]
    vals = [estimate_ridership(sc, J, s) for s in seeds]
    for s, v in zip(seeds, vals):
        print(f"seed {s}: {v:.1f} groups/h")
    print(f"M(J={J}) = {sum(vals) / len(vals):.1f} groups/h")
    return 0


def load_sweep_spec(path, seed=None) -> SweepSpec:
    path = Path(path)
    doc = yaml.safe_load(path.read_text()) or {}
    if "scenario" in doc:
        base = load_scenario(path.parent / doc["scenario"])
    else:
        base = scenario_from_dict(doc.get("base", {}))
    tags = doc.get("tags", "all")
    tags = ten_tags() if tags == "all" else [str(t).zfill(4) for t in tags]
    overrides = tuple((o["label"], dict(o["balancing"])) for o in doc.get("overrides", []))
    return SweepSpec(
        base=base, tags=tuple(tags),
        lambdas=tuple(float(x) for x in doc.get("lambdas", [base.demand.lambda_total])),
        fleets=tuple(int(x) for x in doc.get("fleets", [base.vehicles.J])),
        replications=int(doc.get("replications", 5)),
        seed=int(seed if seed is not None else doc.get("seed", base.sim.seed)),
        overrides=overrides,
        M={int(k): float(v) for k, v in doc["M"].items()} if doc.get("M") else None)


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec, args.seed)
    if args.ridership and spec.M is None:
        spec = replace(spec, M={J: estimate_ridership(spec.base, J, spec.seed) for J in spec.fleets})
    rows = sweep(spec, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_summary(rows, out / "summary.csv")
    report.emit_report(out, "csv", rows)
    print(f"{len(rows)} runs written to {out}")
    return 0


def cmd_report(args) -> int:
    for p in report.emit_report(args.dir, args.format):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prt-evm", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", default=".")
    p.add_argument("--events", action="store_true", help="also write events.csv.gz")
    p.add_argument("--duration", type=float, help="override the measurement window [s]")
    p.add_argument("--M", type=float, help="maximum ridership, to report rho")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ridership", help="estimate maximum ridership M")
    p.add_argument("scenario")
    p.add_argument("--J", type=int)
    p.add_argument("--seed", type=int, default=_default_seed() or 1)
    p.add_argument("--seeds", type=int, default=1)
    p.set_defaults(func=cmd_ridership)

    p = sub.add_parser("sweep", help="run a tag x demand x fleet sweep")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ridership", action="store_true", help="estimate M per fleet for rho")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="tables or scatter plots from a sweep directory")
    p.add_argument("dir")
    p.add_argument("--format", choices=("csv", "svg"), default="csv")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except SimError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return 3
    except (OSError, NetworkError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
