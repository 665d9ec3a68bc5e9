"""Minimal SVG line charts.

Only ``svg``, ``rect``, ``line``, ``polyline`` and ``text`` elements are
emitted, with fixed number formatting so output is byte-stable.
"""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

W, H = 640, 400
ML, MR, MT, MB = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.3g}"


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], *, title: str = "",
               xlabel: str = "", ylabel: str = "", logy: bool = False) -> str:
    pts = []
    for label, xs, ys in series:
        xy = [(float(x), float(y)) for x, y in zip(xs, ys)
              if math.isfinite(float(x)) and math.isfinite(float(y)) and (not logy or float(y) > 0)]
        if logy:
            xy = [(x, math.log10(y)) for x, y in xy]
        pts.append((label, xy))
    allx = [x for _, xy in pts for x, _ in xy] or [0.0, 1.0]
    ally = [y for _, xy in pts for _, y in xy] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = W - ML - MR, H - MT - MB

    def sx(x):
        return ML + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MT + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{W / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{ML + pw / 2:.0f}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{MT + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {MT + ph / 2:.0f})">{escape(ylabel + (" (log10)" if logy else ""))}</text>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<line x1="{_fmt(sx(fx))}" y1="{MT + ph}" x2="{_fmt(sx(fx))}" y2="{MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(fx))}" y="{MT + ph + 18}" text-anchor="middle" font-size="10">{_tick(fx)}</text>')
        out.append(f'<line x1="{ML - 5}" y1="{_fmt(sy(fy))}" x2="{ML}" y2="{_fmt(sy(fy))}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{_fmt(sy(fy) + 3)}" text-anchor="end" font-size="10">{_tick(fy)}</text>')
    for k, (label, xy) in enumerate(pts):
        color = COLORS[k % len(COLORS)]
        if xy:
            path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in xy)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = MT + 14 + 14 * k
        out.append(f'<line x1="{W - MR - 110}" y1="{ly - 4}" x2="{W - MR - 92}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR - 88}" y="{ly}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
