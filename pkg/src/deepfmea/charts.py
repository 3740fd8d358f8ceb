"""Minimal self-contained SVG charts.

Output is deterministic text (fixed number formatting, no timestamps or
random ids) so chart files can be listed in a digest manifest.
"""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + step * 1e-9:
        out.append(round(v, 12))
        v += step
    return out


def _bounds(values: Sequence[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    steps: bool = False,
) -> str:
    """Render ``(name, xs, ys)`` series; points with a non-finite coordinate are skipped."""
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    xlo, xhi = _bounds([x for _, xs, _ in series for x in xs])
    ylo, yhi = _bounds([y for _, _, ys in series for y in ys])

    def sx(x: float) -> float:
        return left + (x - xlo) / (xhi - xlo) * pw

    def sy(y: float) -> float:
        return top + ph - (y - ylo) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(xlo, xhi):
        x = sx(t)
        parts.append(f'<line x1="{_f(x)}" y1="{top + ph}" x2="{_f(x)}" y2="{top + ph + 4}" stroke="#444"/>')
        parts.append(f'<text x="{_f(x)}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        y = sy(t)
        parts.append(f'<line x1="{left - 4}" y1="{_f(y)}" x2="{left}" y2="{_f(y)}" stroke="#444"/>')
        parts.append(f'<text x="{left - 6}" y="{_f(y + 4)}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">'
        f"{escape(ylabel)}</text>"
    )
    for i, (name, xs, ys) in enumerate(series):
        colour = COLOURS[i % len(COLOURS)]
        pts = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if steps and pts:
            stepped = [pts[0]]
            for p in pts[1:]:
                stepped.append((p[0], stepped[-1][1]))
                stepped.append(p)
            pts = stepped
        if pts:
            d = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = top + 14 + 14 * i
        parts.append(f'<line x1="{left + pw - 90}" y1="{ly - 4}" x2="{left + pw - 74}" y2="{ly - 4}" stroke="{colour}"/>')
        parts.append(f'<text x="{left + pw - 70}" y="{ly}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(labels: Sequence[str], values: Sequence[float], title: str = "", ylabel: str = "") -> str:
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    hi = max([v for v in values if math.isfinite(v)] + [0.0]) or 1.0
    n = max(len(values), 1)
    bw = pw / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="#444"/>',
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">'
        f"{escape(ylabel)}</text>",
    ]
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = max(v, 0.0) / hi * ph
        x = left + i * bw + bw * 0.15
        parts.append(f'<rect x="{_f(x)}" y="{_f(top + ph - h)}" width="{_f(bw * 0.7)}" height="{_f(h)}" fill="{COLOURS[0]}"/>')
        parts.append(f'<text x="{_f(x + bw * 0.35)}" y="{top + ph + 14}" text-anchor="middle">{escape(lab)}</text>')
        parts.append(f'<text x="{_f(x + bw * 0.35)}" y="{_f(top + ph - h - 4)}" text-anchor="middle">{v:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
