"""Minimal static SVG line charts (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_panels_svg"]

COLORS = ("#222222", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def _decimate(x, y, max_points):
    if len(x) <= max_points:
        return x, y
    # keep min and max per bucket so narrow features survive
    k = int(math.ceil(len(x) / (max_points / 2)))
    m = len(x) // k * k
    xb = x[:m].reshape(-1, k)
    yb = y[:m].reshape(-1, k)
    yb_safe = np.where(np.isfinite(yb), yb, np.nan)
    with np.errstate(all="ignore"):
        lo = np.nanargmin(np.where(np.isnan(yb_safe), np.inf, yb_safe), axis=1)
        hi = np.nanargmax(np.where(np.isnan(yb_safe), -np.inf, yb_safe), axis=1)
    rows = np.arange(len(xb))
    first = np.minimum(lo, hi)
    second = np.maximum(lo, hi)
    xs = np.stack([xb[rows, first], xb[rows, second]], 1).ravel()
    ys = np.stack([yb[rows, first], yb[rows, second]], 1).ravel()
    return xs, ys


def _path(xs, ys, sx, sy):
    parts = []
    pen = False
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            pen = False
            continue
        parts.append(f"{'L' if pen else 'M'}{sx(x):.2f},{sy(y):.2f}")
        pen = True
    return " ".join(parts)


def line_panels_svg(panels, title="", width=800, panel_height=200, max_points=4000):
    """Stacked line charts.

    ``panels`` is a list of ``(ylabel, x, [(label, y), ...])``. Non-finite
    samples break the line.
    """
    ml, mr, mt, mb = 70, 20, 30, 35
    H = mt + len(panels) * (panel_height + mb) + 10
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" '
           f'viewBox="0 0 {width} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{H}" fill="white"/>',
           f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for p, (ylabel, x, series) in enumerate(panels):
        x = np.asarray(x, dtype=float)
        top = mt + p * (panel_height + mb)
        pw = width - ml - mr
        ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in series])
        ys_all = ys_all[np.isfinite(ys_all)]
        ylo, yhi = (float(ys_all.min()), float(ys_all.max())) if ys_all.size else (0.0, 1.0)
        if yhi == ylo:
            ylo, yhi = ylo - 0.5 * (abs(ylo) or 1), yhi + 0.5 * (abs(yhi) or 1)
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad
        xlo, xhi = float(x[0]), float(x[-1]) if x[-1] > x[0] else float(x[0]) + 1

        def sx(v, xlo=xlo, xhi=xhi):
            return ml + (v - xlo) / (xhi - xlo) * pw

        def sy(v, ylo=ylo, yhi=yhi, top=top):
            return top + (yhi - v) / (yhi - ylo) * panel_height

        out.append(f'<rect x="{ml}" y="{top}" width="{pw}" height="{panel_height}" '
                   'fill="none" stroke="#888"/>')
        for t in _ticks(ylo, yhi):
            out.append(f'<line x1="{ml - 4}" y1="{sy(t):.2f}" x2="{ml}" y2="{sy(t):.2f}" stroke="#888"/>')
            out.append(f'<text x="{ml - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
        for t in _ticks(xlo, xhi):
            out.append(f'<line x1="{sx(t):.2f}" y1="{top + panel_height}" x2="{sx(t):.2f}" '
                       f'y2="{top + panel_height + 4}" stroke="#888"/>')
            out.append(f'<text x="{sx(t):.2f}" y="{top + panel_height + 15}" '
                       f'text-anchor="middle">{t:g}</text>')
        out.append(f'<text x="14" y="{top + panel_height / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + panel_height / 2})">{escape(ylabel)}</text>')
        for i, (label, y) in enumerate(series):
            xs, ys = _decimate(x, np.asarray(y, dtype=float), max_points)
            color = COLORS[i % len(COLORS)]
            out.append(f'<path d="{_path(xs, ys, sx, sy)}" fill="none" stroke="{color}" '
                       'stroke-width="1"/>')
            out.append(f'<text x="{ml + 8 + 110 * i}" y="{top + 14}" fill="{color}">'
                       f'{escape(label)}</text>')
    out.append(f'<text x="{ml + (width - ml - mr) / 2}" y="{H - 4}" text-anchor="middle">time (s)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
