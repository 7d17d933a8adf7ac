"""Minimal deterministic SVG line charts (no plotting dependency).

Produces a self-contained SVG string: axes with ticks, one polyline per
series with an optional translucent confidence band, an optional horizontal
reference line, and a legend. All coordinates are formatted with fixed
precision so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)

WIDTH, HEIGHT = 720, 460
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 40, 56


@dataclass
class Series:
    name: str
    x: list
    y: list
    lo: list = field(default_factory=list)
    hi: list = field(default_factory=list)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _log_ticks(lo, hi):
    """Decade ticks (with 3x subdivisions when the span is short)."""
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    ticks = []
    for e in range(lo_e, hi_e + 1):
        for mult in (1.0, 3.0) if hi_e - lo_e <= 3 else (1.0,):
            v = mult * 10.0**e
            if lo / 1.001 <= v <= hi * 1.001:
                ticks.append(v)
    return ticks or [lo, hi]


def _tick_label(v: float) -> str:
    if v == int(v) and abs(v) < 1e7:
        return str(int(v))
    return f"{v:g}"


def line_chart(
    series_list,
    title="",
    x_label="",
    y_label="",
    x_log=False,
    ref_level=None,
    ref_label="",
) -> str:
    """Render series (each optionally with a lo/hi band) to an SVG string."""
    series_list = list(series_list)
    xs = [x for s in series_list for x in s.x]
    ys = [y for s in series_list for y in s.y]
    ys += [v for s in series_list for v in list(s.lo) + list(s.hi)]
    if ref_level is not None:
        ys.append(ref_level)
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    pad = 0.05 * (y_max - y_min or 1.0)
    y_min, y_max = y_min - pad, y_max + pad
    if x_log and x_min <= 0:
        raise ValueError("log axis needs positive x values")
    if x_max == x_min:
        x_max = x_min * 1.5 if x_log else x_min + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        if x_log:
            f = (math.log10(x) - math.log10(x_min)) / (
                math.log10(x_max) - math.log10(x_min)
            )
        else:
            f = (x - x_min) / (x_max - x_min)
        return MARGIN_L + f * plot_w

    def py(y):
        f = (y - y_min) / (y_max - y_min)
        return MARGIN_T + (1.0 - f) * plot_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">'
    )
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" '
            f'font-size="15">{title}</text>'
        )

    # axes box
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333" stroke-width="1"/>'
    )
    x_ticks = _log_ticks(x_min, x_max) if x_log else _nice_ticks(x_min, x_max)
    for t in x_ticks:
        x = px(t)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{py(y_min):.2f}" x2="{_fmt(x)}" '
            f'y2="{py(y_min) + 5:.2f}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{py(y_min) + 18:.2f}" '
            f'text-anchor="middle">{_tick_label(t)}</text>'
        )
    for t in _nice_ticks(y_min, y_max):
        y = py(t)
        out.append(
            f'<line x1="{MARGIN_L - 5}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
            f'y2="{_fmt(y)}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 4)}" '
            f'text-anchor="end">{_tick_label(t)}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 12}" '
            f'text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        cy = MARGIN_T + plot_h / 2
        out.append(
            f'<text x="16" y="{cy:.0f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {cy:.0f})">{y_label}</text>'
        )

    if ref_level is not None:
        y = py(ref_level)
        out.append(
            f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{MARGIN_L + plot_w}" '
            f'y2="{_fmt(y)}" stroke="black" stroke-width="1.5" stroke-dasharray="6 3"/>'
        )

    for i, s in enumerate(sorted(series_list, key=lambda s: s.name)):
        color = PALETTE[i % len(PALETTE)]
        if s.lo and s.hi:
            pts = [f"{_fmt(px(x))},{_fmt(py(v))}" for x, v in zip(s.x, s.hi)]
            pts += [
                f"{_fmt(px(x))},{_fmt(py(v))}"
                for x, v in zip(reversed(s.x), reversed(s.lo))
            ]
            out.append(
                f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.15" '
                f'stroke="none"/>'
            )
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(v))}" for x, v in zip(s.x, s.y))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
        for x, v in zip(s.x, s.y):
            out.append(
                f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(v))}" r="2.6" fill="{color}"/>'
            )

    # legend
    lx = MARGIN_L + plot_w + 12
    ly = MARGIN_T + 8
    entries = [s.name for s in sorted(series_list, key=lambda s: s.name)]
    if ref_level is not None and ref_label:
        entries = entries + [ref_label]
    for i, name in enumerate(entries):
        y = ly + 18 * i
        if ref_level is not None and ref_label and i == len(entries) - 1:
            out.append(
                f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 22}" y2="{y - 4}" '
                f'stroke="black" stroke-width="1.5" stroke-dasharray="6 3"/>'
            )
        else:
            color = PALETTE[i % len(PALETTE)]
            out.append(
                f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 22}" y2="{y - 4}" '
                f'stroke="{color}" stroke-width="1.8"/>'
            )
        out.append(f'<text x="{lx + 28}" y="{y}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
