"""Minimal native SVG line/scatter plots (log or linear axes)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

__all__ = ["Series", "plot_svg"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass
class Series:
    label: str
    x: list
    y: list
    mode: str = "line"  # "line", "scatter" or "dashed"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, log: bool):
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 5))
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 6:
            step *= m
            break
    k0 = math.ceil(lo / step)
    return [k * step for k in range(k0, int(math.floor(hi / step)) + 1)]


def plot_svg(series: list[Series], title: str = "", xlabel: str = "", ylabel: str = "",
             logx: bool = True, logy: bool = True, width: int = 560, height: int = 400) -> str:
    """Render ``series`` to an SVG document string (deterministic output)."""
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = [[(tx(a), ty(b)) for a, b in zip(s.x, s.y)
            if (a > 0 or not logx) and (b > 0 or not logy) and math.isfinite(a) and math.isfinite(b)]
           for s in series]
    flat = [p for ps in pts for p in ps] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in flat), max(p[0] for p in flat)
    y0, y1 = min(p[1] for p in flat), max(p[1] for p in flat)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx, pady = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    L, R, T, B = 70, 150, 40, 50
    pw, ph = width - L - R, height - T - B
    X = lambda v: L + (v - x0) / (x1 - x0) * pw
    Y = lambda v: T + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1, logx):
        p = math.log10(v) if logx else v
        if x0 <= p <= x1:
            out.append(f'<line x1="{_fmt(X(p))}" y1="{T + ph}" x2="{_fmt(X(p))}" y2="{T + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{_fmt(X(p))}" y="{T + ph + 16}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1, logy):
        p = math.log10(v) if logy else v
        if y0 <= p <= y1:
            out.append(f'<line x1="{L - 4}" y1="{_fmt(Y(p))}" x2="{L}" y2="{_fmt(Y(p))}" stroke="black"/>')
            out.append(f'<text x="{L - 6}" y="{_fmt(Y(p) + 4)}" text-anchor="end">{v:g}</text>')
    for k, (s, ps) in enumerate(zip(series, pts)):
        c = _COLORS[k % len(_COLORS)]
        if s.mode == "scatter":
            out.extend(f'<circle cx="{_fmt(X(a))}" cy="{_fmt(Y(b))}" r="1.2" fill="{c}" fill-opacity="0.5"/>'
                       for a, b in ps)
        elif ps:
            d = " ".join(f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in ps)
            dash = ' stroke-dasharray="5,4"' if s.mode == "dashed" else ""
            out.append(f'<polyline points="{d}" fill="none" stroke="{c}" stroke-width="1.5"{dash}/>')
            if s.mode == "line":
                out.extend(f'<circle cx="{_fmt(X(a))}" cy="{_fmt(Y(b))}" r="2.5" fill="{c}"/>' for a, b in ps)
        ly = T + 14 + 16 * k
        out.append(f'<line x1="{L + pw + 10}" y1="{ly - 4}" x2="{L + pw + 28}" y2="{ly - 4}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{L + pw + 32}" y="{ly}">{escape(s.label)}</text>')
    out.append(f'<text x="{L + pw / 2}" y="{T - 14}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{L + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{T + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {T + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
