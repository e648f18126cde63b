"""Minimal SVG writers: a log-log line plot and a heat map. No plotting dependency."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, MARGIN = 560, 400, 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _header(w, h):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
            f'<rect width="{w}" height="{h}" fill="white"/>']


def loglog_svg(series: dict, xlabel: str = "dt", ylabel: str = "error", title: str = "") -> str:
    """``series`` maps a label to ``(xs, ys)``; non-positive or missing y values are skipped."""
    pts = {k: [(x, y) for x, y in zip(*v) if y is not None and y > 0 and x > 0] for k, v in series.items()}
    allx = [math.log10(x) for v in pts.values() for x, _ in v]
    ally = [math.log10(y) for v in pts.values() for _, y in v]
    if not allx:
        allx, ally = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(allx), max(allx) + 1e-12
    y0, y1 = math.floor(min(ally)), math.ceil(max(ally)) + 1e-12

    def X(x):
        return MARGIN + (math.log10(x) - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def Y(y):
        return HEIGHT - MARGIN - (math.log10(y) - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = _header(WIDTH, HEIGHT)
    out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
               f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>')
    for e in range(int(y0), int(math.floor(y1)) + 1):
        y = Y(10.0 ** e)
        out.append(f'<text x="{MARGIN - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for x in sorted({x for v in pts.values() for x, _ in v}):
        out.append(f'<text x="{X(x):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{x:g}</text>')
    for i, (label, v) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        path = " ".join(f"{X(x):.1f},{Y(y):.1f}" for x, y in sorted(v))
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in v:
            out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{MARGIN + 10}" y="{MARGIN + 18 + 16 * i}" fill="{color}">{escape(label)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2}" transform="rotate(-90 15 {HEIGHT / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="30" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_svg(field, xlabel: str = "time", ylabel: str = "y", title: str = "") -> str:
    """Heat map of a 2-D array indexed ``[row (vertical), column (horizontal)]``, diverging colours."""
    F = np.asarray(field, dtype=float)
    rows, cols = F.shape
    scale = np.abs(F).max() or 1.0
    cw = (WIDTH - 2 * MARGIN) / cols
    ch = (HEIGHT - 2 * MARGIN) / rows
    out = _header(WIDTH, HEIGHT)
    for i in range(rows):
        for j in range(cols):
            v = F[i, j] / scale
            r, g, b = (255, int(255 * (1 - v)), int(255 * (1 - v))) if v >= 0 else \
                (int(255 * (1 + v)), int(255 * (1 + v)), 255)
            out.append(f'<rect x="{MARGIN + j * cw:.2f}" y="{HEIGHT - MARGIN - (i + 1) * ch:.2f}" '
                       f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="rgb({r},{g},{b})"/>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2}" transform="rotate(-90 15 {HEIGHT / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="30" text-anchor="middle">{escape(title)} (max |v| = {scale:.3g})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
