"""CSV tables and dependency-free SVG line charts for sweep results."""

from __future__ import annotations

import csv
import io
import math
from html import escape

CSV_HEADER = ["sweep_var", "value", "policy", "avg_aoi", "stderr", "j_star", "solve_iters"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".10g")


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.sweep_var, fmt(r.value), r.policy, fmt(r.avg_aoi), fmt(r.stderr),
                         fmt(r.j_star), fmt(r.solve_iters)])
    return buf.getvalue()


def exact_csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sweep_var", "value", "policy", "exact_avg_aoi"])
    for r in rows:
        writer.writerow([r.sweep_var, fmt(r.value), r.policy, fmt(r.exact)])
    return buf.getvalue()


def svg_text(rows, x_label: str, width: int = 720, height: int = 480) -> str:
    """Line chart of ``avg_aoi`` against the sweep value, one polyline per series.

    A series is a (sweep_var, policy) pair.  Each vertex carries the CSV
    strings of its value and ``avg_aoi`` in ``data-x``/``data-y``.
    """
    series: dict[tuple[str, str], list] = {}
    for r in rows:
        series.setdefault((r.sweep_var, r.policy), []).append(r)
    pts = [(r.value, r.avg_aoi) for r in rows if math.isfinite(r.avg_aoi)]
    left, right, top, bottom = 70, 200, 20, 50
    pw, ph = width - left - right, height - top - bottom
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.2f}" y="{top + ph + 16}" text-anchor="middle">{fmt(round(xv, 4))}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.2f}" text-anchor="end">{fmt(round(yv, 4))}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text transform="translate(16 {top + ph / 2:.2f}) rotate(-90)" text-anchor="middle">avg AoI</text>')
    for n, ((var, policy), members) in enumerate(series.items()):
        color = _PALETTE[n % len(_PALETTE)]
        name = policy if var == x_label else f"{policy} {var[len(x_label):].lstrip('@')}"
        good = [r for r in members if math.isfinite(r.avg_aoi)]
        coords = " ".join(f"{sx(r.value):.2f},{sy(r.avg_aoi):.2f}" for r in good)
        out.append(f'<g class="series" data-sweep-var="{escape(var)}" data-policy="{escape(policy)}">')
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for r in good:
            out.append(f'<circle cx="{sx(r.value):.2f}" cy="{sy(r.avg_aoi):.2f}" r="2.5" fill="{color}" '
                       f'data-x="{fmt(r.value)}" data-y="{fmt(r.avg_aoi)}"/>')
        out.append("</g>")
        ly = top + 14 + 16 * n
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
