"""Minimal deterministic SVG line charts for sweep and behaviour plots."""

from __future__ import annotations

from typing import Sequence

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _n(v: float) -> str:
    return format(v, ".2f")


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    markers_only: bool = False,
    width: int = 640,
    height: int = 400,
) -> str:
    """Render ``(label, xs, ys)`` series into an SVG document string."""
    left, right, top, bottom = 70, 150, 40, 50
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_n(px(fx))}" y="{top + ph + 16}" text-anchor="middle">{fx:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{_n(py(fy) + 4)}" text-anchor="end">{fy:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.0f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.0f})">{ylabel}</text>'
    )
    for idx, (label, sx, sy) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        if markers_only:
            for x, y in zip(sx, sy):
                out.append(f'<circle cx="{_n(px(x))}" cy="{_n(py(y))}" r="2.5" fill="{color}"/>')
        else:
            pts = " ".join(f"{_n(px(x))},{_n(py(y))}" for x, y in zip(sx, sy))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 16 * (idx + 1)
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 28}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
