"""Minimal SVG line charts: stacked panels sharing an x axis, or a scatter of fronts."""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

from .errors import IoError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")
WIDTH = 760
PANEL_H = 170
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 24, 40


def _ticks(lo, hi, count=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    return f"{v:.6g}"


class _Panel:
    def __init__(self, top, xlim, ylim, height):
        self.top = top
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.h = height
        self.w = WIDTH - MARGIN_L - MARGIN_R

    def px(self, x):
        span = (self.x1 - self.x0) or 1.0
        return MARGIN_L + (x - self.x0) / span * self.w

    def py(self, y):
        span = (self.y1 - self.y0) or 1.0
        return self.top + self.h - (y - self.y0) / span * self.h

    def frame(self, ylabel, xlabel=None):
        out = [f'<rect x="{MARGIN_L}" y="{self.top}" width="{self.w}" height="{self.h}" '
               f'fill="none" stroke="#444"/>']
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="#444"/>')
            out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
        for t in _ticks(self.x0, self.x1, 8):
            x = self.px(t)
            out.append(f'<line x1="{x:.2f}" y1="{self.top + self.h}" x2="{x:.2f}" y2="{self.top + self.h + 4}" stroke="#444"/>')
            out.append(f'<text x="{x:.2f}" y="{self.top + self.h + 15}" text-anchor="middle" font-size="10">{_fmt(t)}</text>')
        cy = self.top + self.h / 2
        out.append(f'<text x="16" y="{cy:.2f}" font-size="11" transform="rotate(-90 16 {cy:.2f})" '
                   f'text-anchor="middle">{escape(ylabel)}</text>')
        if xlabel:
            out.append(f'<text x="{MARGIN_L + self.w / 2:.2f}" y="{self.top + self.h + 32}" '
                       f'font-size="11" text-anchor="middle">{escape(xlabel)}</text>')
        return out


def _limits(arrays):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]) if arrays else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    if not vals.size:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _write(path, parts, height, title):
    body = "\n".join(parts)
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
           f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">\n'
           f'<rect width="100%" height="100%" fill="white"/>\n'
           f'<text x="{WIDTH / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>\n'
           f'{body}\n</svg>\n')
    try:
        Path(path).write_text(svg)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def stacked_lines(path, x, panels, title="", xlabel="distance [m]", step=False):
    """``panels`` is a list of ``(ylabel, {series_name: y_values})``.

    Series may be shorter than ``x``; each is drawn against the leading part.
    ``step=True`` draws piecewise-constant series (for signals and torques).
    """
    x = np.asarray(x, dtype=float)
    parts = []
    top = MARGIN_T
    names = []
    for p, (ylabel, series) in enumerate(panels):
        ylim = _limits(list(series.values()))
        panel = _Panel(top, (float(x[0]), float(x[-1])), ylim, PANEL_H)
        parts += panel.frame(ylabel, xlabel if p == len(panels) - 1 else None)
        for i, (name, y) in enumerate(series.items()):
            y = np.asarray(y, dtype=float)
            xs = x[:len(y)]
            color = PALETTE[i % len(PALETTE)]
            pts = []
            last_y = None
            for a, b in zip(xs, y):
                if not math.isfinite(b):
                    continue
                if step and last_y is not None:
                    pts.append(f"{panel.px(a):.2f},{last_y:.2f}")
                last_y = panel.py(b)
                pts.append(f"{panel.px(a):.2f},{last_y:.2f}")
            if pts:
                parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{" ".join(pts)}"/>')
            if name not in names:
                names.append(name)
        top += PANEL_H + MARGIN_B
    for i, name in enumerate(names):
        y = MARGIN_T + 12 + 16 * i
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<line x1="{WIDTH - MARGIN_R + 10}" y1="{y}" x2="{WIDTH - MARGIN_R + 30}" y2="{y}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R + 34}" y="{y + 4}" font-size="11">{escape(name)}</text>')
    _write(path, parts, top, title)


def scatter_fronts(path, fronts, xlabel="fuel [g]", ylabel="time [s]", title=""):
    """``fronts`` maps a label to ``(x_values, y_values)``; points are joined in order."""
    xs = [np.asarray(v[0], dtype=float) for v in fronts.values()]
    ys = [np.asarray(v[1], dtype=float) for v in fronts.values()]
    panel = _Panel(MARGIN_T, _limits(xs), _limits(ys), 360)
    parts = panel.frame(ylabel, xlabel)
    for i, (name, (fx, fy)) in enumerate(fronts.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(panel.px(a), panel.py(b)) for a, b in zip(fx, fy) if math.isfinite(a) and math.isfinite(b)]
        if len(pts) > 1:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="4 3" '
                         f'points="{" ".join(f"{a:.2f},{b:.2f}" for a, b in pts)}"/>')
        for a, b in pts:
            parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3.5" fill="{color}"/>')
        y = MARGIN_T + 12 + 16 * i
        parts.append(f'<circle cx="{WIDTH - MARGIN_R + 20}" cy="{y}" r="4" fill="{color}"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R + 30}" y="{y + 4}" font-size="11">{escape(name)}</text>')
    _write(path, parts, MARGIN_T + 360 + MARGIN_B + 10, title)
