"""Minimal log-log line plots written directly as SVG."""

from __future__ import annotations

import math
from html import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(series: dict, title: str = "", xlabel: str = "N", ylabel: str = "error",
               width: int = 560, height: int = 400) -> str:
    """Render ``{name: (xs, ys)}`` on log-log axes; non-positive points are dropped."""
    clean = {k: [(x, y) for x, y in zip(*v) if x > 0 and y > 0] for k, v in series.items()}
    pts = [p for v in clean.values() for p in v]
    if not pts:
        raise ValueError("nothing to plot: no positive data")
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    dx = _decades(min(xs), max(xs))
    dy = _decades(min(ys), max(ys))
    if len(dx) < 2:
        dx.append(dx[-1] + 1)
    if len(dy) < 2:
        dy.append(dy[-1] + 1)
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + pw * (math.log10(v) - dx[0]) / (dx[-1] - dx[0])

    def Y(v):
        return mt + ph * (1 - (math.log10(v) - dy[0]) / (dy[-1] - dy[0]))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {mt + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for k in dx:
        x = X(10.0**k)
        out.append(f'<line x1="{x:.1f}" y1="{mt}" x2="{x:.1f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 16}" text-anchor="middle">1e{k}</text>')
    for k in dy:
        y = Y(10.0**k)
        out.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.1f}" text-anchor="end">1e{k}</text>')
    for i, (name, data) in enumerate(clean.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in data)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in data:
            out.append(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{ml + 10}" y="{mt + 16 + 14 * i}" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
