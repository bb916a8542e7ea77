"""Minimal static SVG plotting: histogram bars, polylines and circle markers.

Output is a deterministic function of the plotted data, so re-rendering the
same CSV content gives byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Plot"]


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    """Round tick positions covering ``[lo, hi]``."""
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + step * 1e-9, step)]


@dataclass
class Plot:
    width: int = 640
    height: int = 400
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    margin: tuple = (40, 20, 40, 60)  # top, right, bottom, left
    _items: list = field(default_factory=list)

    def bars(self, edges, heights, color="#9ecae1"):
        self._items.append(("bars", np.asarray(edges, float), np.asarray(heights, float), color))
        return self

    def line(self, x, y, color="#d62728", width=1.5):
        self._items.append(("line", np.asarray(x, float), np.asarray(y, float), (color, width)))
        return self

    def circles(self, x, y, color="#1f77b4", radius=4.0, filled=False):
        self._items.append(("circles", np.asarray(x, float), np.asarray(y, float), (color, radius, filled)))
        return self

    def _limits(self):
        xs, ys = [], [0.0]
        for kind, a, b, _ in self._items:
            if kind == "bars":
                xs += [a.min(), a.max()] if a.size else []
                ys += [b.max()] if b.size else []
            elif a.size:
                xs += [np.nanmin(a), np.nanmax(a)]
                ys += [np.nanmin(b), np.nanmax(b)]
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            y1 = y0 + 1.0
        pad = 0.05 * (y1 - y0)
        return x0, x1, y0, y1 + pad

    def render(self) -> str:
        top, right, bottom, left = self.margin
        pw, ph = self.width - left - right, self.height - top - bottom
        x0, x1, y0, y1 = self._limits()

        def sx(x):
            return left + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return top + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
        ]
        for kind, a, b, style in self._items:
            if kind == "bars":
                for lo, hi, h in zip(a[:-1], a[1:], b):
                    if h <= 0:
                        continue
                    out.append(
                        f'<rect x="{_fmt(sx(lo))}" y="{_fmt(sy(h))}" width="{_fmt(sx(hi) - sx(lo))}" '
                        f'height="{_fmt(sy(y0) - sy(h))}" fill="{style}" stroke="none"/>'
                    )
            elif kind == "line":
                ok = np.isfinite(a) & np.isfinite(b)
                pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(a[ok], b[ok]))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{style[0]}" stroke-width="{style[1]}"/>')
            else:
                color, r, filled = style
                fill = color if filled else "none"
                for x, y in zip(a, b):
                    out.append(
                        f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="{r}" fill="{fill}" stroke="{color}"/>'
                    )
        # axes and ticks
        out.append(
            f'<path d="M{left},{top} V{top + ph} H{left + pw}" fill="none" stroke="black" stroke-width="1"/>'
        )
        for t in _ticks(x0, x1):
            x = sx(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{top + ph}" x2="{_fmt(x)}" y2="{top + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
        for t in _ticks(y0, y1):
            y = sy(t)
            out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
            out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{t:g}</text>')
        if self.title:
            out.append(f'<text x="{self.width / 2}" y="{top / 2}" text-anchor="middle" font-size="13">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + pw / 2}" y="{self.height - 4}" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(
                f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                f'transform="rotate(-90 14 {top + ph / 2})">{escape(self.ylabel)}</text>'
            )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
