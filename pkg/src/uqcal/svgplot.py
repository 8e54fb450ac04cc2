"""Minimal static SVG charts.

Plots are a convenience next to the CSV outputs, so this stays tiny:
line and ribbon panels with linear axes, written as deterministic SVG
text with no plotting dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Line", "Band", "Panel", "render_panels"]

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 16.0
_MARGIN_TOP = 28.0
_MARGIN_BOTTOM = 40.0


@dataclass
class Line:
    x: np.ndarray
    y: np.ndarray
    color: str = "#1f6fb2"
    width: float = 1.6
    opacity: float = 1.0
    label: str = ""


@dataclass
class Band:
    x: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    color: str = "#1f6fb2"
    opacity: float = 0.25


@dataclass
class Panel:
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    lines: list = field(default_factory=list)
    bands: list = field(default_factory=list)


def _finite(values):
    arr = np.asarray(values, dtype=float).ravel()
    return arr[np.isfinite(arr)]


def _limits(panel):
    xs = np.concatenate([_finite(l.x) for l in panel.lines]
                        + [_finite(b.x) for b in panel.bands]) if (panel.lines or panel.bands) else np.array([0.0, 1.0])
    ys = np.concatenate([_finite(l.y) for l in panel.lines]
                        + [_finite(b.lo) for b in panel.bands]
                        + [_finite(b.hi) for b in panel.bands]) if (panel.lines or panel.bands) else np.array([0.0, 1.0])
    if xs.size == 0:
        xs = np.array([0.0, 1.0])
    if ys.size == 0:
        ys = np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + (abs(y0) if y0 else 1.0) * 1e-3 + 1e-12
    pad = 0.04 * (y1 - y0)
    return x0, x1, y0 - pad, y1 + pad


def _ticks(lo, hi, count=5):
    span = hi - lo
    if span <= 0 or not math.isfinite(span):
        return [lo]
    raw = span / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return ticks


def _fmt(v):
    return f"{v:.6g}"


def render_panels(path, panels, ncols=1, panel_width=640, panel_height=230):
    """Write the panels to an SVG file, row-major in a ncols grid."""
    panels = list(panels)
    nrows = (len(panels) + ncols - 1) // ncols
    width = ncols * panel_width
    height = nrows * panel_height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        ox = (i % ncols) * panel_width
        oy = (i // ncols) * panel_height
        parts.append(_render_panel(panel, ox, oy, panel_width, panel_height))
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", newline="\n")


def _render_panel(panel, ox, oy, w, h):
    x0, x1, y0, y1 = _limits(panel)
    px0, px1 = ox + _MARGIN_LEFT, ox + w - _MARGIN_RIGHT
    py0, py1 = oy + h - _MARGIN_BOTTOM, oy + _MARGIN_TOP

    def sx(x):
        return px0 + (x - x0) / (x1 - x0) * (px1 - px0)

    def sy(y):
        return py0 + (y - y0) / (y1 - y0) * (py1 - py0)

    out = [f'<g font-size="11" fill="#222">']
    if panel.title:
        out.append(
            f'<text x="{ox + w / 2:.1f}" y="{oy + 16:.1f}" text-anchor="middle" '
            f'font-size="13">{panel.title}</text>'
        )
    # frame and ticks
    out.append(
        f'<rect x="{px0:.1f}" y="{py1:.1f}" width="{px1 - px0:.1f}" '
        f'height="{py0 - py1:.1f}" fill="none" stroke="#888" stroke-width="1"/>'
    )
    for tx in _ticks(x0, x1):
        out.append(
            f'<line x1="{sx(tx):.1f}" y1="{py0:.1f}" x2="{sx(tx):.1f}" '
            f'y2="{py0 + 4:.1f}" stroke="#888"/>'
        )
        out.append(
            f'<text x="{sx(tx):.1f}" y="{py0 + 16:.1f}" text-anchor="middle">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y0, y1):
        out.append(
            f'<line x1="{px0 - 4:.1f}" y1="{sy(ty):.1f}" x2="{px0:.1f}" '
            f'y2="{sy(ty):.1f}" stroke="#888"/>'
        )
        out.append(
            f'<text x="{px0 - 6:.1f}" y="{sy(ty) + 3.5:.1f}" text-anchor="end">{_fmt(ty)}</text>'
        )
    if panel.x_label:
        out.append(
            f'<text x="{(px0 + px1) / 2:.1f}" y="{py0 + 32:.1f}" text-anchor="middle">{panel.x_label}</text>'
        )
    if panel.y_label:
        cx, cy = ox + 14, (py0 + py1) / 2
        out.append(
            f'<text x="{cx:.1f}" y="{cy:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 {cx:.1f} {cy:.1f})">{panel.y_label}</text>'
        )

    def clip(y):
        return min(max(y, y0), y1)

    for band in panel.bands:
        xs = np.asarray(band.x, dtype=float)
        los = np.asarray(band.lo, dtype=float)
        his = np.asarray(band.hi, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(los) & np.isfinite(his)
        if not keep.any():
            continue
        xs, los, his = xs[keep], los[keep], his[keep]
        pts = [f"{sx(x):.2f},{sy(clip(y)):.2f}" for x, y in zip(xs, his)]
        pts += [f"{sx(x):.2f},{sy(clip(y)):.2f}" for x, y in zip(xs[::-1], los[::-1])]
        out.append(
            f'<polygon points="{" ".join(pts)}" fill="{band.color}" '
            f'fill-opacity="{band.opacity:g}" stroke="none"/>'
        )
    legend_y = py1 + 12
    for line in panel.lines:
        xs = np.asarray(line.x, dtype=float)
        ys = np.asarray(line.y, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if not keep.any():
            continue
        pts = " ".join(
            f"{sx(x):.2f},{sy(clip(y)):.2f}" for x, y in zip(xs[keep], ys[keep])
        )
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{line.color}" '
            f'stroke-width="{line.width:g}" stroke-opacity="{line.opacity:g}"/>'
        )
        if line.label:
            out.append(
                f'<line x1="{px1 - 120:.1f}" y1="{legend_y:.1f}" x2="{px1 - 100:.1f}" '
                f'y2="{legend_y:.1f}" stroke="{line.color}" stroke-width="{line.width:g}"/>'
            )
            out.append(
                f'<text x="{px1 - 95:.1f}" y="{legend_y + 3.5:.1f}">{line.label}</text>'
            )
            legend_y += 14
    out.append("</g>")
    return "\n".join(out)
