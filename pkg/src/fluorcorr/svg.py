"""Minimal SVG line plots (axes, optional log y, legend, vertical markers)."""

from __future__ import annotations

import math

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=20, bottom=50)
COLORS = ("#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return list(np.linspace(lo, hi, n))


def line_plot(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    xlabel: str,
    ylabel: str,
    log_y: bool = False,
    markers: tuple[float, ...] = (),
) -> str:
    """Render ``[(label, x, y), ...]`` as an SVG document string."""
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series])
    if log_y:
        ys = ys[ys > 0]
        tf = np.log10
    else:
        tf = lambda v: np.asarray(v, float)  # noqa: E731
    x0, x1 = float(xs.min()), float(xs.max())
    ty = tf(ys)
    y0, y1 = float(ty.min()), float(ty.max())
    if y1 <= y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (np.asarray(x, float) - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (1.0 - (np.asarray(y, float) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.2f}" y="{HEIGHT - MARGIN["bottom"] + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:.1f}" if log_y else f"{t:.3g}"
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(t):.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{ylabel}</text>'
    )
    for m in markers:
        if x0 <= m <= x1:
            out.append(f'<line x1="{px(m):.2f}" x2="{px(m):.2f}" y1="{MARGIN["top"]}" '
                       f'y2="{MARGIN["top"] + ph}" stroke="#888" stroke-dasharray="4 3"/>')
    for i, (label, x, y) in enumerate(series):
        x, y = np.asarray(x, float), np.asarray(y, float)
        if log_y:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x), py(y)) if math.isfinite(b))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 14 * i
        lx = MARGIN["left"] + pw - 150
        out.append(f'<line x1="{lx}" x2="{lx + 18}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
