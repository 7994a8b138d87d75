"""Static SVG renders of sweep curves.

A plot is a pure function of the tabulated points. Same points, same
bytes: fixed canvas, fixed tick layout, fixed palette, floats printed
through one formatter. That keeps the artifacts diffable and lets tests
assert on file content instead of pixels.
"""

from __future__ import annotations

import math

_WIDTH = 640
_HEIGHT = 440
_MARGIN_L = 72
_MARGIN_R = 20
_MARGIN_T = 40
_MARGIN_B = 56

_PALETTE = ("#1f6fb4", "#d1495b", "#3a7d44", "#8a5ab8", "#c98a1e")


def _fmt(v: float) -> str:
    """Fixed shortest-ish decimal; avoids exponent notation jitter."""
    out = f"{v:.6g}"
    return "0" if out == "-0" else out


def _span(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def render_sweep(
    series: dict[str, list[tuple[float, float]]],
    x_label: str,
    y_label: str,
    title: str = "",
) -> str:
    """Render one or more named curves into an SVG document string.

    Points are drawn in the order given (sweeps arrive in grid order);
    series are drawn in sorted name order so the output is reproducible
    regardless of dict construction order.
    """
    names = sorted(series)
    pts = [p for name in names for p in series[name]]
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite plot point ({x}, {y})")

    x0, x1 = _span([p[0] for p in pts]) if pts else (0.0, 1.0)
    y0, y1 = _span([p[1] for p in pts]) if pts else (0.0, 1.0)
    px0, px1 = _MARGIN_L, _WIDTH - _MARGIN_R
    py0, py1 = _HEIGHT - _MARGIN_B, _MARGIN_T

    def sx(x: float) -> float:
        return px0 + (x - x0) / (x1 - x0) * (px1 - px0)

    def sy(y: float) -> float:
        return py0 + (y - y0) / (y1 - y0) * (py1 - py0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    axis = 'stroke="#222" stroke-width="1"'
    out.append(f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" {axis}/>')
    out.append(f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" {axis}/>')
    for t in _ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{py0}" x2="{_fmt(x)}" y2="{py0 + 5}" {axis}/>')
        out.append(
            f'<text x="{_fmt(x)}" y="{py0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    for t in _ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{px0 - 5}" y1="{_fmt(y)}" x2="{px0}" y2="{_fmt(y)}" {axis}/>')
        out.append(
            f'<text x="{px0 - 9}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(t)}</text>'
        )
    out.append(
        f'<text x="{(px0 + px1) // 2}" y="{_HEIGHT - 14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>'
    )
    out.append(
        f'<text x="18" y="{(py0 + py1) // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(py0 + py1) // 2})">{y_label}</text>'
    )
    for k, name in enumerate(names):
        color = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in series[name])
        if coords:
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        for x, y in series[name]:
            out.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.6" fill="{color}"/>'
            )
        ly = _MARGIN_T + 16 * k
        out.append(
            f'<line x1="{px1 - 130}" y1="{ly}" x2="{px1 - 104}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        out.append(
            f'<text x="{px1 - 98}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
