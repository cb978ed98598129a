"""Minimal static SVG plotting: precision-recall curves on a fixed 0..1 axis
box, one polyline per series, legend by label. No plotting dependency, output
is deterministic text."""

from __future__ import annotations

from typing import List, Sequence, Tuple

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

_W, _H = 480, 400
_ML, _MR, _MT, _MB = 60, 20, 20, 50  # margins around the axis box


def _x(v: float) -> float:
    return _ML + v * (_W - _ML - _MR)


def _y(v: float) -> float:
    return _H - _MB - v * (_H - _MT - _MB)


def pr_curve_svg(series: Sequence[Tuple[str, Sequence[Tuple[float, float]]]]) -> str:
    """series: (label, [(recall, precision), ...]) per curve."""
    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    # axis box and ticks every 0.25
    parts.append(
        f'<rect x="{_x(0):.1f}" y="{_y(1):.1f}" width="{_x(1) - _x(0):.1f}" '
        f'height="{_y(0) - _y(1):.1f}" fill="none" stroke="black"/>'
    )
    for i in range(5):
        v = i / 4.0
        parts.append(
            f'<line x1="{_x(v):.1f}" y1="{_y(0):.1f}" x2="{_x(v):.1f}" y2="{_y(0) + 5:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_x(v):.1f}" y="{_y(0) + 18:.1f}" text-anchor="middle">{v:g}</text>'
        )
        parts.append(
            f'<line x1="{_x(0):.1f}" y1="{_y(v):.1f}" x2="{_x(0) - 5:.1f}" y2="{_y(v):.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_x(0) - 8:.1f}" y="{_y(v) + 4:.1f}" text-anchor="end">{v:g}</text>'
        )
    parts.append(
        f'<text x="{(_x(0) + _x(1)) / 2:.1f}" y="{_H - 12}" text-anchor="middle">recall</text>'
    )
    parts.append(
        f'<text x="16" y="{(_y(0) + _y(1)) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_y(0) + _y(1)) / 2:.1f})">precision</text>'
    )
    for idx, (label, points) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        if points:
            coords = " ".join(f"{_x(r):.2f},{_y(p):.2f}" for r, p in points)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = _MT + 16 + 16 * idx
        parts.append(
            f'<line x1="{_x(1) - 130:.1f}" y1="{ly - 4}" x2="{_x(1) - 110:.1f}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{_x(1) - 104:.1f}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
