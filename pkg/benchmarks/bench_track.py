"""Compare the compiled and pure-Python track kernels.

    python benchmarks/bench_track.py [--vehicles 200] [--seconds 3600]

Part one drives the bare kernel around a ring; part two times a full
simulation on the reference network with each backend.
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from prt_evm import track as track_mod
from prt_evm.experiments import run_experiment
from prt_evm.scenario import Scenario, SimConfig
from prt_evm.track import ARRIVED, make_track


def kernel_run(backend, n_veh, horizon, seed=0):
    rng = np.random.default_rng(seed)
    n_seg = 40
    sectors = rng.integers(20, 200, size=n_seg).tolist()
    speeds = rng.choice([10.0, 15.0], size=n_seg).tolist()
    tr = make_track(sectors, speeds, 2.0, 3, 2.0, 2.0, n_veh, backend=backend)
    starts = sorted((float(rng.uniform(0, 60)), v) for v in range(n_veh))
    for t, v in starts:
        s = int(rng.integers(n_seg))
        tr.set_route(v, [(s + k) % n_seg for k in range(int(rng.integers(2, n_seg)))])
    k = 0
    t0 = time.perf_counter()
    while True:
        t_next = starts[k][0] if k < len(starts) else horizon
        note = tr.step(t_next)
        if note is None:
            if k < len(starts):
                tr.enter(starts[k][1], t_next)
                k += 1
                continue
            break
        if note[1] == ARRIVED:
            v = note[2]
            tr.remove(v, note[0])
            if note[0] < horizon:
                s = int(rng.integers(n_seg))
                tr.set_route(v, [(s + j) % n_seg for j in range(int(rng.integers(2, n_seg)))])
                tr.enter(v, note[0])
    return tr.n_events, time.perf_counter() - t0


def sim_run(backend, seconds):
    sc = Scenario().with_demand(210.0).with_tag("1111")
    sc = replace(sc, sim=SimConfig(warmup_s=600.0, duration_s=seconds, seed=1))
    t0 = time.perf_counter()
    run_experiment(sc, 1, backend=backend)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vehicles", type=int, default=200)
    ap.add_argument("--seconds", type=float, default=3600.0)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if track_mod.CompiledTrack is not None else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the Python backend only")
    print(f"kernel: {args.vehicles} vehicles on a 40-segment ring, {args.seconds:g} s")
    for b in backends:
        n, dt = kernel_run(b, args.vehicles, args.seconds)
        print(f"  {b:7s} {n:9d} sector events  {dt:7.2f} s  {n / dt / 1e6:6.2f} M events/s")
    print(f"simulation: reference network, lambda 210, {args.seconds:g} s measured")
    for b in backends:
        dt = sim_run(b, args.seconds)
        print(f"  {b:7s} {dt:7.2f} s")


if __name__ == "__main__":
    main()
