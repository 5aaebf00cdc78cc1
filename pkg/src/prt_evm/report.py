"""CSV outputs and ASWT-vs-NET scatter plots (plain SVG, no plotting library)."""

from __future__ import annotations

import csv
import gzip
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .experiments import TAG_BASE, TAG_SUG, Cell, aggregate, variants
from .metrics import RunSummary

DECISION_FIELDS = ("t", "task", "vehicle", "from", "to", "score")
EVENT_FIELDS = ("t", "event_kind", "vehicle_id", "where", "detail")
CELL_FIELDS = ("J", "lam", "tag", "rho", "runs", "ASWT", "AWT", "NET", "ETM", "QC")


def write_summary(rows: list[RunSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RunSummary.CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r.row())


def read_summary(path) -> list[RunSummary]:
    out = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            out.append(RunSummary(
                ASWT=float(d["ASWT"]), AWT=float(d["AWT"]), NET=int(d["NET"]),
                ETM=float(d["ETM"]), QC=float(d["QC"]), served_groups=int(d["served_groups"]),
                lam=float(d["lam"]), rho=float(d["rho"]), J=int(d["J"]), tag=d["tag"],
                seed=int(d["seed"])))
    return out


def write_decisions(decisions, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_FIELDS)
        w.writerows(decisions)


def write_events(events, path) -> None:
    """Gzipped event log; the gzip header carries no timestamp so reruns match byte for byte."""
    with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
        gz.write((",".join(EVENT_FIELDS) + "\n").encode())
        for t, kind, vid, where, detail in events:
            gz.write(f"{t!r},{kind},{vid},{where},{detail}\n".encode())


def write_cells(cells: list[Cell], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CELL_FIELDS)
        for c in cells:
            w.writerow([getattr(c, k) for k in CELL_FIELDS])


# --------------------------------------------------------------------------
# scatter


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9:
        out.append(round(v, 10))
        v += step
    return out


def scatter_svg(cells: list[Cell], title: str = "") -> str:
    """ASWT (vertical) against NET (horizontal), one marker per configuration.

    The base configuration gets a solid circle, the minimum-QC one a dashed
    circle and the suggested one a dotted circle.
    """
    W, Hh, m = 560, 420, 60
    xs = [c.NET for c in cells]
    ys = [c.ASWT for c in cells]
    xt = _ticks(0.0, max(xs) * 1.1 if xs else 1.0)
    yt = _ticks(0.0, max(ys) * 1.1 if ys else 1.0)
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]

    def px(x):
        return m + (x - x0) / ((x1 - x0) or 1) * (W - 2 * m)

    def py(y):
        return Hh - m - (y - y0) / ((y1 - y0) or 1) * (Hh - 2 * m)

    best = min(cells, key=lambda c: (c.QC, c.ASWT, c.tag)) if cells else None
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hh}" '
             f'viewBox="0 0 {W} {Hh}" font-family="sans-serif" font-size="11">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
             f'<line x1="{m}" y1="{Hh - m}" x2="{W - m}" y2="{Hh - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{Hh - m}" stroke="black"/>']
    for t in xt:
        parts.append(f'<line x1="{px(t):.1f}" y1="{Hh - m}" x2="{px(t):.1f}" y2="{Hh - m + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(t):.1f}" y="{Hh - m + 18}" text-anchor="middle">{t:g}</text>')
    for t in yt:
        parts.append(f'<line x1="{m - 5}" y1="{py(t):.1f}" x2="{m}" y2="{py(t):.1f}" stroke="black"/>')
        parts.append(f'<text x="{m - 8}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{W / 2}" y="{Hh - 15}" text-anchor="middle">NET</text>')
    parts.append(f'<text x="15" y="{Hh / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 15 {Hh / 2})">ASWT [s]</text>')
    for c in cells:
        x, y = px(c.NET), py(c.ASWT)
        parts.append(f'<path class="point" d="M {x:.1f} {y - 4:.1f} L {x + 4:.1f} {y:.1f} '
                     f'L {x:.1f} {y + 4:.1f} L {x - 4:.1f} {y:.1f} Z" fill="black">'
                     f'<title>{escape(c.tag)}</title></path>')
        parts.append(f'<text x="{x + 6:.1f}" y="{y - 6:.1f}" font-size="9">{escape(c.tag)}</text>')
        marks = []
        if c.tag == TAG_BASE:
            marks.append(("base", ""))
        if best is not None and c is best:
            marks.append(("best", ' stroke-dasharray="6 3"'))
        if c.tag == TAG_SUG:
            marks.append(("sug", ' stroke-dasharray="1 3"'))
        for r, (cls, dash) in enumerate(marks):
            parts.append(f'<circle class="{cls}" cx="{x:.1f}" cy="{y:.1f}" r="{11 + 5 * r}" '
                         f'fill="none" stroke="black"{dash}/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(out_dir, fmt: str = "csv", rows: list[RunSummary] | None = None) -> list[Path]:
    """Per-cell table (csv) or one scatter per (J, lambda) variant (svg) from ``summary.csv``."""
    out_dir = Path(out_dir)
    if rows is None:
        rows = read_summary(out_dir / "summary.csv")
    if not rows:
        raise ValueError("no runs to report")
    cells = aggregate(rows)
    written = []
    if fmt == "csv":
        p = out_dir / "cells.csv"
        write_cells(cells, p)
        written.append(p)
        p = out_dir / "variants.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("J", "lam", "which", "tag", "ASWT", "NET", "ETM", "QC",
                        "ASWT_impr", "NET_impr", "ETM_impr"))
            for v in variants(cells):
                for which, c in (("base", v.base), ("sug", v.sug), ("best", v.best)):
                    if c is None:
                        continue
                    imp = v.improvements(which) if which != "base" else {"ASWT": 0.0, "NET": 0.0, "ETM": 0.0}
                    w.writerow((v.J, v.lam, which, c.tag, c.ASWT, c.NET, c.ETM, c.QC,
                                imp["ASWT"], imp["NET"], imp["ETM"]))
        written.append(p)
    elif fmt == "svg":
        by = {}
        for c in cells:
            by.setdefault((c.J, c.lam), []).append(c)
        for (J, lam), cs in sorted(by.items()):
            p = out_dir / f"scatter_{J}_{lam:g}.svg"
            p.write_text(scatter_svg(cs, f"J = {J}, lambda = {lam:g} groups/h"))
            written.append(p)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return written
