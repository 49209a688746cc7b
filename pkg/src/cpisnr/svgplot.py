"""Minimal line plots written directly as SVG."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f4e9c", "#c0392b", "#27ae60", "#8e44ad")
DASHES = ("", "6,4", "2,3", "8,3,2,3")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + step * 1e-9, step))


def line_plot(x, series: dict, xlabel: str = "", ylabel: str = "", title: str = "",
              width: int = 640, height: int = 420) -> str:
    """SVG text for one or more ``y(x)`` curves; NaN points break the line."""
    x = np.asarray(x, float)
    ys = {k: np.asarray(v, float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] + [np.array([])])
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 == y0:
        y0, y1 = y0 - 0.5 * abs(y0 or 1), y1 + 0.5 * abs(y1 or 1)
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    x0, x1 = float(np.nanmin(x)), float(np.nanmax(x))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    ml, mr, mt, mb = 80, 20, 40, 55
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml - 5}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="#333"/>')
        out.append(f'<text x="{ml - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    for i, (name, y) in enumerate(ys.items()):
        color, dash = COLORS[i % len(COLORS)], DASHES[i % len(DASHES)]
        segs, cur = [], []
        for xv, yv in zip(x, y):
            if np.isfinite(xv) and np.isfinite(yv):
                cur.append(f"{px(xv):.2f},{py(yv):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        style = f' stroke-dasharray="{dash}"' if dash else ""
        for s in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{style} points="{" ".join(s)}"/>')
        ly = mt + 16 + 16 * i
        out.append(f'<line x1="{ml + pw - 150}" y1="{ly}" x2="{ml + pw - 125}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{style}/>')
        out.append(f'<text x="{ml + pw - 120}" y="{ly + 4}">{escape(name)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {mt + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_plot(path, x, series: dict, **kw) -> None:
    with open(path, "w") as fh:
        fh.write(line_plot(x, series, **kw))
