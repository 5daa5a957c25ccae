"""Minimal deterministic SVG emission (presentation only, no data contract).

Hand-rolled so identical inputs produce identical bytes; no timestamps,
ids, or library version strings end up in the output.
"""

from __future__ import annotations

import numpy as np

_W = 640
_H = 640
_PAD = 40


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class _Mapper:
    def __init__(self, xlim, ylim, width, height):
        self.xlim = xlim
        self.ylim = ylim
        self.width = width
        self.height = height

    def pt(self, x, y):
        fx = (x - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        fy = (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return (_PAD + fx * (self.width - 2 * _PAD),
                self.height - _PAD - fy * (self.height - 2 * _PAD))


def _polyline(mapper, pts, stroke, dashed=False, width=1.2):
    coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in
                      (mapper.pt(x, y) for x, y in pts))
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"'
            f'{dash} points="{coords}"/>')


def trajectory_svg(dom_lx, dom_ly, curves) -> str:
    """Trajectories inside the domain rectangle.

    curves: iterable of (points (M,2), color, dashed) — dashed for measured
    tracks, solid for model trajectories.
    """
    m = _Mapper((0, dom_lx), (0, dom_ly), _W, _H)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}">',
             '<rect width="100%" height="100%" fill="white"/>']
    x0, y0 = m.pt(0, 0)
    x1, y1 = m.pt(dom_lx, dom_ly)
    parts.append(f'<rect x="{_fmt(min(x0, x1))}" y="{_fmt(min(y0, y1))}" '
                 f'width="{_fmt(abs(x1 - x0))}" height="{_fmt(abs(y1 - y0))}" '
                 f'fill="none" stroke="black" stroke-width="1.5"/>')
    for pts, color, dashed in curves:
        pts = np.asarray(pts)
        if len(pts) >= 2:
            parts.append(_polyline(m, pts, color, dashed))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def series_svg(series, xlabel="t") -> str:
    """Line plot of (t, y, color, dashed) tuples on shared axes."""
    xs = np.concatenate([np.asarray(s[0]) for s in series])
    ys = np.concatenate([np.asarray(s[1]) for s in series])
    xlim = (float(xs.min()), float(xs.max()) if xs.max() > xs.min() else float(xs.min()) + 1)
    pad = 0.05 * (ys.max() - ys.min() + 1e-30)
    ylim = (float(ys.min() - pad), float(ys.max() + pad))
    m = _Mapper(xlim, ylim, _W, _H // 2)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H // 2}" '
             f'viewBox="0 0 {_W} {_H // 2}">',
             '<rect width="100%" height="100%" fill="white"/>']
    ax0 = m.pt(xlim[0], ylim[0])
    ax1 = m.pt(xlim[1], ylim[1])
    parts.append(f'<rect x="{_fmt(min(ax0[0], ax1[0]))}" y="{_fmt(min(ax0[1], ax1[1]))}" '
                 f'width="{_fmt(abs(ax1[0] - ax0[0]))}" height="{_fmt(abs(ax1[1] - ax0[1]))}" '
                 f'fill="none" stroke="gray" stroke-width="0.8"/>')
    if ylim[0] < 0 < ylim[1]:
        z0 = m.pt(xlim[0], 0.0)
        z1 = m.pt(xlim[1], 0.0)
        parts.append(f'<line x1="{_fmt(z0[0])}" y1="{_fmt(z0[1])}" x2="{_fmt(z1[0])}" '
                     f'y2="{_fmt(z1[1])}" stroke="gray" stroke-width="0.5"/>')
    for t, y, color, dashed in series:
        pts = np.stack([np.asarray(t), np.asarray(y)], axis=1)
        parts.append(_polyline(m, pts, color, dashed))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
