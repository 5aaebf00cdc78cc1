import csv
import gzip
import re
from dataclasses import replace

import pytest

from prt_evm import cli, report
from prt_evm.experiments import (
    SweepSpec,
    aggregate,
    sensitivity_variants,
    sweep,
    ten_tags,
    variants,
)
from prt_evm.metrics import RunSummary
from prt_evm.scenario import Scenario, SimConfig, load_scenario, save_scenario


def test_ten_tags():
    tags = ten_tags()
    assert len(tags) == len(set(tags)) == 10
    assert tags[:2] == ["0000", "1111"]
    assert sum(t.count("1") == 1 for t in tags) == 4
    assert sum(t.count("1") == 3 for t in tags) == 4


def test_sensitivity_variants():
    vs = sensitivity_variants(0.3)
    assert len(vs) == 8
    d = dict(vs)
    assert d["F_AI+30%"] == {"F_AI": pytest.approx(6.5)}
    assert d["F_Q-30%"] == {"F_Q": pytest.approx(0.7)}


def _row(tag, A, N, seed=1, lam=100.0):
    return RunSummary(A, A * 0.8, N, N * 0.5, A * N, 10, lam, 0.2, 48, tag, seed)


def test_aggregate_and_variants():
    rows = [_row("0000", 100, 200), _row("0000", 80, 220, 2), _row("1111", 30, 800),
            _row("1000", 60, 300)]
    cells = aggregate(rows)
    base = next(c for c in cells if c.tag == "0000")
    assert base.ASWT == 90 and base.NET == 210 and base.QC == 90 * 210 and base.runs == 2
    (v,) = variants(cells)
    assert v.best.tag == "1000" and v.sug.tag == "1111"     # 60 * 300 < 90 * 210
    assert v.improvements("sug")["ASWT"] == pytest.approx((90 - 30) / 90 * 100)


def test_sweep_spec_cells():
    spec = SweepSpec(Scenario(), tags=("0000", "1111"), lambdas=(50, 100), fleets=(24,),
                     replications=2, overrides=(("slow", {"T_ND": 2.0}),))
    cells = spec.cells()
    assert len(cells) == 6
    assert {c[2] for c in cells} == {"0000", "1111", "slow"}
    slow = next(c[3] for c in cells if c[2] == "slow")
    assert slow.evm.balancing.T_ND == 2.0
    assert spec.seeds() == [1, 2]
    with pytest.raises(ValueError):
        SweepSpec(Scenario(), replications=0)


def test_scatter_marks():
    rows = [_row(t, a, n) for t, a, n in
            [("0000", 100, 100), ("1111", 40, 900), ("1000", 50, 300), ("0100", 70, 250)]]
    svg = report.scatter_svg(aggregate(rows), "x")
    assert svg.count('class="point"') == 4
    assert svg.count('class="base"') == 1
    assert svg.count('class="sug"') == 1
    assert svg.count('class="best"') == 1
    assert 'class="best"' in svg and 'stroke-dasharray="6 3"' in svg


def test_scenario_yaml_round_trip(tmp_path):
    sc = Scenario().with_tag("1101").with_fleet(30).with_demand(123.0)
    p = tmp_path / "s.yaml"
    save_scenario(sc, p)
    assert load_scenario(p) == sc


def test_small_sweep_and_reports(tmp_path):
    base = replace(Scenario(), sim=SimConfig(warmup_s=300.0, duration_s=900.0, seed=1))
    spec = SweepSpec(base, tags=tuple(ten_tags()), lambdas=(100.0,), fleets=(48,), replications=1,
                     M={48: 500.0})
    rows = sweep(spec)
    assert len(rows) == 10
    report.write_summary(rows, tmp_path / "summary.csv")
    assert [r.row() for r in report.read_summary(tmp_path / "summary.csv")] == \
        [dict((k, type(v)(v)) for k, v in r.row().items()) for r in rows]
    paths = report.emit_report(tmp_path, "svg")
    assert [p.name for p in paths] == ["scatter_48_100.svg"]
    assert paths[0].read_text().count('class="point"') == 10
    report.emit_report(tmp_path, "csv")
    with open(tmp_path / "cells.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 10
    with open(tmp_path / "variants.csv") as fh:
        which = [r["which"] for r in csv.DictReader(fh)]
    assert which == ["base", "sug", "best"]


# ---------------------------------------------------------------- CLI


def test_cli_validate(tmp_path, capsys):
    from prt_evm.city import city_net_path
    assert cli.main(["validate", str(city_net_path())]) == 0
    assert "ok (96 nodes" in capsys.readouterr().out
    bad = tmp_path / "bad.net"
    bad.write_text("nodes: [{id: A, kind: station, berths: 0}]\nsegments: []\n")
    assert cli.main(["validate", str(bad)]) in (1, 2)
    assert cli.main(["validate", str(tmp_path / "missing.net")]) == 2


def _short_scenario(tmp_path, **sim):
    sc = replace(Scenario(), sim=SimConfig(**{"warmup_s": 300.0, "duration_s": 900.0,
                                              "seed": 1, **sim}))
    p = tmp_path / "sc.yaml"
    save_scenario(sc, p)
    return p


def test_cli_simulate_is_deterministic(tmp_path):
    p = _short_scenario(tmp_path)
    for d in ("a", "b"):
        assert cli.main(["simulate", str(p), "--seed", "3", "--out", str(tmp_path / d),
                         "--events"]) == 0
    for f in ("summary.csv", "decisions.csv", "events.csv.gz"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    with gzip.open(tmp_path / "a" / "events.csv.gz", "rt") as fh:
        head = fh.readline().strip()
    assert head == "t,event_kind,vehicle_id,where,detail"


def test_cli_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "7")
    args = cli.build_parser().parse_args(["simulate", "x.yaml"])
    assert args.seed == 7


def test_cli_sweep_and_report(tmp_path, capsys):
    spec = tmp_path / "sw.yaml"
    spec.write_text("base:\n  sim: {warmup_s: 300, duration_s: 600, seed: 1}\n"
                    "tags: ['0000', '1111']\nlambdas: [80]\nreplications: 1\n"
                    "M: {48: 500}\n")
    out = tmp_path / "out"
    assert cli.main(["sweep", str(spec), "--out", str(out)]) == 0
    assert (out / "cells.csv").exists()
    rows = report.read_summary(out / "summary.csv")
    assert {r.tag for r in rows} == {"0000", "1111"}
    assert all(r.rho == pytest.approx(80 / 500) for r in rows)
    assert cli.main(["report", str(out), "--format", "svg"]) == 0
    assert re.search(r"scatter_48_80\.svg", capsys.readouterr().out)


def test_cli_ridership(tmp_path, capsys):
    p = _short_scenario(tmp_path, duration_s=600.0)
    assert cli.main(["ridership", str(p), "--J", "12"]) == 0
    assert "M(J=12)" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["simulate", str(tmp_path / "nope.yaml")]) == 2
    assert cli.main(["report", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
