"""Dependency-free static SVG line charts.

The CSV files remain the source of truth; these charts exist for eyeballing
curve shapes, not pixel fidelity.
"""

from __future__ import annotations

import math

_PALETTE = ["#0173b2", "#de8f05", "#029e73", "#d55e00", "#cc78bc", "#56b4e9"]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(1, count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if mult * mag >= raw:
            step = mult * mag
            break
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        if t >= lo - 1e-12 * span:
            ticks.append(round(t, 12))
        t += step
    return ticks or [lo, hi]


def line_chart(
    series: list[tuple[str, list[float], list[float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 640,
    height: int = 440,
) -> str:
    """Render labeled polylines with linear axes; non-finite points are dropped."""
    m_left, m_right, m_top, m_bottom = 62, 16, 34, 48
    plot_w = width - m_left - m_right
    plot_h = height - m_top - m_bottom

    pts = []
    for _, xs, ys in series:
        pts.extend(
            (x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)
        )
    if pts:
        x_lo = min(p[0] for p in pts)
        x_hi = max(p[0] for p in pts)
        y_lo = min(p[1] for p in pts)
        y_hi = max(p[1] for p in pts)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return m_left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return m_top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for t in _ticks(x_lo, x_hi):
        px = sx(t)
        out.append(
            f'<line x1="{px:.1f}" y1="{m_top}" x2="{px:.1f}" y2="{m_top+plot_h}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{px:.1f}" y="{m_top+plot_h+16}" text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        out.append(
            f'<line x1="{m_left}" y1="{py:.1f}" x2="{m_left+plot_w}" y2="{py:.1f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{m_left-6}" y="{py+4:.1f}" text-anchor="end">{t:g}</text>'
        )
    out.append(
        f'<rect x="{m_left}" y="{m_top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333"/>'
    )
    out.append(
        f'<text x="{m_left+plot_w/2:.1f}" y="{height-10}" text-anchor="middle">{x_label}</text>'
    )
    out.append(
        f'<text x="16" y="{m_top+plot_h/2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {m_top+plot_h/2:.1f})">{y_label}</text>'
    )
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = [
            f"{sx(x):.2f},{sy(y):.2f}"
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)
        ]
        if coords:
            out.append(
                f'<polyline points="{" ".join(coords)}" fill="none" '
                f'stroke="{color}" stroke-width="1.8"/>'
            )
        ly = m_top + 16 + 16 * idx
        lx = m_left + plot_w - 130
        out.append(
            f'<line x1="{lx}" y1="{ly-4}" x2="{lx+22}" y2="{ly-4}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        out.append(f'<text x="{lx+28}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)


def write_chart(path, series, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(line_chart(series, **kwargs))
