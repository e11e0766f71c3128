"""Minimal deterministic SVG line charts.

Hand-rolled rather than pulled from a plotting library so that two runs with
the same inputs emit byte-identical files (reports embed config hashes and
must be diffable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Series:
    name: str
    xs: tuple
    ys: tuple
    color: str = "#1f77b4"
    dashed: bool = False


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _f(v: float) -> str:
    return format(v, ".2f").rstrip("0").rstrip(".")


def line_chart(
    path,
    series: list[Series],
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 720,
    height: int = 480,
) -> None:
    """Write a self-contained SVG line chart."""
    margin_l, margin_r, margin_t, margin_b = 64, 16, 36, 48
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for y in s.ys]
    if not xs:
        raise ValueError("chart needs at least one point")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x: float) -> float:
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    # axes
    parts.append(
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>'
    )
    for t in _ticks(x_lo, x_hi):
        if x_lo <= t <= x_hi:
            x = px(t)
            parts.append(f'<line x1="{_f(x)}" y1="{margin_t + plot_h}" x2="{_f(x)}" y2="{margin_t + plot_h + 4}" stroke="#333"/>')
            parts.append(f'<text x="{_f(x)}" y="{margin_t + plot_h + 18}" text-anchor="middle">{_f(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        if y_lo <= t <= y_hi:
            y = py(t)
            parts.append(f'<line x1="{margin_l - 4}" y1="{_f(y)}" x2="{margin_l}" y2="{_f(y)}" stroke="#333"/>')
            parts.append(f'<text x="{margin_l - 8}" y="{_f(y + 4)}" text-anchor="end">{_f(t)}</text>')
    if x_label:
        parts.append(f'<text x="{margin_l + plot_w / 2:.0f}" y="{height - 10}" text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(
            f'<text x="14" y="{margin_t + plot_h / 2:.0f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {margin_t + plot_h / 2:.0f})">{y_label}</text>'
        )
    for s in series:
        pts = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in zip(s.xs, s.ys))
        dash = ' stroke-dasharray="6 3"' if s.dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="1.5"{dash}/>')
    # legend
    for i, s in enumerate(series):
        y = margin_t + 14 + 16 * i
        x = margin_l + plot_w - 150
        dash = ' stroke-dasharray="6 3"' if s.dashed else ""
        parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" stroke="{s.color}" stroke-width="1.5"{dash}/>')
        parts.append(f'<text x="{x + 30}" y="{y}">{s.name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def pick_color(i: int) -> str:
    return _PALETTE[i % len(_PALETTE)]
