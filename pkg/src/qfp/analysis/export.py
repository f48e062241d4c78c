"""CSV / JSON / text / SVG writers for analysis results.  All output is deterministic."""

from __future__ import annotations

import csv
import io
import json
from typing import Sequence

from .edp import EdpEntry
from .energy import EnergySweepResult
from .margins import MarginResult
from .skip import SkipFeasibilityMatrix


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# margins


def margins_csv(results: Sequence[MarginResult]) -> str:
    rows = [(r.f, r.T, r.p_low, r.p_high, r.width_db, int(r.passed)) for r in results]
    return _csv(["f_hz", "T_s", "p_low_dbm", "p_high_dbm", "width_db", "pass"], rows)


def margins_json(results: Sequence[MarginResult]) -> str:
    return dumps([
        {
            "f": r.f, "T": r.T, "p_low": r.p_low, "p_high": r.p_high, "width_db": r.width_db,
            "pass": r.passed, "nominal": r.nominal, "resolution": r.resolution,
            "clipped": list(r.clipped), "diagnostic": r.diagnostic,
        }
        for r in results
    ])


# energy


def energy_csv(result: EnergySweepResult) -> str:
    rows = [(e.f, e.T, e.energy) for e in result.entries]
    return _csv(["f_hz", "T_s", "energy_j"], rows)


def energy_json(result: EnergySweepResult) -> str:
    return dumps([
        {"f": e.f, "T": e.T, "energy": e.energy, "scope": e.scope, "per_combination": e.per_combination, "per_gate": e.per_gate}
        for e in result.entries
    ])


# skip feasibility


def skip_csv(m: SkipFeasibilityMatrix) -> str:
    rows = []
    for T in m.T_values:
        for k in m.k_values:
            e = m.entries[(T, k)]
            rows.append((T, k, int(e.passed), e.errors, e.margin_db, None if e.predicted is None else int(e.predicted)))
    return _csv(["T_s", "k", "pass", "errors", "margin_db", "predicted"], rows)


def skip_json(m: SkipFeasibilityMatrix) -> str:
    return dumps({
        "f": m.f,
        "tmax": m.tmax,
        "T": m.T_values,
        "k": m.k_values,
        "entries": [
            {"T": e.T, "k": e.k, "pass": e.passed, "errors": e.errors, "margin_db": e.margin_db, "predicted": e.predicted}
            for e in (m.entries[(T, k)] for T in m.T_values for k in m.k_values)
        ],
    })


def skip_grid(m: SkipFeasibilityMatrix) -> str:
    """Rows T, columns k, ✓ pass / ✗ fail."""
    head = "T [ps] | " + " ".join(f"k={k}" for k in m.k_values)
    lines = [head, "-" * len(head)]
    for T in m.T_values:
        cells = " ".join(f"{'✓' if m.passed(T, k) else '✗':^{len(f'k={k}')}}" for k in m.k_values)
        lines.append(f"{T * 1e12:6.1f} | {cells}")
    return "\n".join(lines) + "\n"


# edp


def edp_csv(rows: Sequence[EdpEntry]) -> str:
    return _csv(["label", "energy_j", "delay_s", "edp_js"], [(r.label, r.energy, r.delay, r.edp) for r in rows])


def edp_json(rows: Sequence[EdpEntry]) -> str:
    return dumps([{"label": r.label, "energy": r.energy, "delay": r.delay, "edp": r.edp} for r in rows])


# SVG


def _svg(width: int, height: int, body: list[str]) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def svg_heatmap(m: SkipFeasibilityMatrix) -> str:
    cw, ch, x0, y0 = 50, 30, 70, 30
    w = x0 + cw * len(m.k_values) + 20
    h = y0 + ch * len(m.T_values) + 40
    body = [f'<text x="{x0}" y="18">skip feasibility, f = {m.f / 1e9:g} GHz</text>']
    for j, k in enumerate(m.k_values):
        body.append(f'<text x="{x0 + j * cw + cw / 2}" y="{h - 12}" text-anchor="middle">k={k}</text>')
    for i, T in enumerate(m.T_values):
        y = y0 + i * ch
        body.append(f'<text x="{x0 - 8}" y="{y + ch / 2 + 4}" text-anchor="end">{T * 1e12:g} ps</text>')
        for j, k in enumerate(m.k_values):
            ok = m.passed(T, k)
            fill = "#4caf50" if ok else "#e57373"
            body.append(f'<rect x="{x0 + j * cw}" y="{y}" width="{cw - 2}" height="{ch - 2}" fill="{fill}"/>')
            body.append(f'<text x="{x0 + j * cw + cw / 2 - 1}" y="{y + ch / 2 + 4}" text-anchor="middle">{"✓" if ok else "✗"}</text>')
    return _svg(w, h, body)


def svg_lines(series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str, title: str = "") -> str:
    """Simple line plot of (x, y) series on shared linear axes."""
    w, h, ml, mr, mt, mb = 480, 320, 70, 20, 30, 45
    pts = [p for s in series.values() for p in s if p[1] is not None]
    if not pts:
        return _svg(w, h, [f'<text x="{ml}" y="{mt}">{title}: no data</text>'])
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xa, xb = min(xs), max(xs)
    ya, yb = min(ys), max(ys)
    if xb == xa:
        xb = xa + 1
    if yb == ya:
        yb = ya + 1
    sx = lambda x: ml + (x - xa) / (xb - xa) * (w - ml - mr)
    sy = lambda y: h - mb - (y - ya) / (yb - ya) * (h - mt - mb)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    body = [
        f'<text x="{ml}" y="18">{title}</text>',
        f'<line x1="{ml}" y1="{h - mb}" x2="{w - mr}" y2="{h - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{h - mb}" stroke="black"/>',
        f'<text x="{(w + ml) / 2}" y="{h - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{(h - mb + mt) / 2}" transform="rotate(-90 14 {(h - mb + mt) / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{ml - 4}" y="{h - mb}" text-anchor="end">{ya:.3g}</text>',
        f'<text x="{ml - 4}" y="{mt + 4}" text-anchor="end">{yb:.3g}</text>',
        f'<text x="{ml}" y="{h - mb + 14}" text-anchor="middle">{xa:.3g}</text>',
        f'<text x="{w - mr}" y="{h - mb + 14}" text-anchor="middle">{xb:.3g}</text>',
    ]
    for n, (name, s) in enumerate(series.items()):
        c = colors[n % len(colors)]
        s = [p for p in s if p[1] is not None]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s)
        body.append(f'<polyline points="{path}" fill="none" stroke="{c}"/>')
        body += [f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{c}"/>' for x, y in s]
        body.append(f'<text x="{w - mr - 4}" y="{mt + 14 * (n + 1)}" text-anchor="end" fill="{c}">{name}</text>')
    return _svg(w, h, body)
