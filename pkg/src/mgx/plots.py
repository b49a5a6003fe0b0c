"""Hand-rolled SVG line charts for sweep results (no renderer dependency)."""

import math
import os

import numpy as np

from .errors import EmptySelection
from .sweep import aggregate

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 1)]


def _log_ticks(lo, hi):
    lo_e, hi_e = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(lo_e, hi_e + 1) if lo <= 10.0 ** e <= hi * 1.001]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.0e}"
    return f"{v:g}"


class _Axes:
    def __init__(self, xlim, ylim, logx):
        self.xlim, self.ylim, self.logx = xlim, ylim, logx
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(self, x):
        lo, hi = self.xlim
        if self.logx:
            lo, hi, x = math.log10(lo), math.log10(hi), math.log10(x)
        t = 0.5 if hi == lo else (x - lo) / (hi - lo)
        return self.x0 + t * (self.x1 - self.x0)

    def sy(self, y):
        lo, hi = self.ylim
        t = 0.5 if hi == lo else (y - lo) / (hi - lo)
        return self.y0 + t * (self.y1 - self.y0)


def line_chart(series, xlabel, ylabel, title, logx=False):
    """Render ``{label: (xs, ys, errs)}`` as an SVG string with error bars."""
    if not series:
        raise EmptySelection("no series to plot")
    all_x = np.concatenate([s[0] for s in series.values()])
    all_y = np.concatenate([np.asarray(s[1]) + np.asarray(s[2]) for s in series.values()]
                           + [np.asarray(s[1]) - np.asarray(s[2]) for s in series.values()])
    xlim = (all_x.min(), all_x.max())
    pad = 0.05 * max(all_y.max() - all_y.min(), 1e-12)
    ylim = (min(all_y.min() - pad, 0.0), all_y.max() + pad)
    if logx and xlim[0] <= 0:
        raise ValueError("log x-axis requires positive x values")
    ax = _Axes(xlim, ylim, logx)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{(ax.x0 + ax.x1) / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    # axes
    parts.append(f'<line x1="{ax.x0}" y1="{ax.y0}" x2="{ax.x1}" y2="{ax.y0}" stroke="black"/>')
    parts.append(f'<line x1="{ax.x0}" y1="{ax.y0}" x2="{ax.x0}" y2="{ax.y1}" stroke="black"/>')
    xticks = _log_ticks(*xlim) if logx else _ticks(*xlim)
    if len(xticks) < 2:
        xticks = sorted(set(all_x.tolist()))
    for t in xticks:
        px = ax.sx(t)
        parts.append(f'<line x1="{px:.1f}" y1="{ax.y0}" x2="{px:.1f}" y2="{ax.y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{ax.y0 + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(*ylim):
        py = ax.sy(t)
        parts.append(f'<line x1="{ax.x0 - 5}" y1="{py:.1f}" x2="{ax.x0}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ax.x0 - 8}" y="{py + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<text x="{(ax.x0 + ax.x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{(ax.y0 + ax.y1) / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {(ax.y0 + ax.y1) / 2:.1f})">{ylabel}</text>')

    for i, (label, (xs, ys, errs)) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{ax.sx(x):.1f},{ax.sy(y):.1f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, e in zip(xs, ys, errs):
            px, py = ax.sx(x), ax.sy(y)
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="{color}"/>')
            if e > 0:
                parts.append(f'<line x1="{px:.1f}" y1="{ax.sy(y - e):.1f}" '
                             f'x2="{px:.1f}" y2="{ax.sy(y + e):.1f}" stroke="{color}"/>')
        ly = MARGIN["top"] + 16 * i
        lx = WIDTH - MARGIN["right"] + 10
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly + 4}">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts)


def emit_plots(rows, out_dir):
    """Write subopt-vs-K (log x) and subopt-vs-epsilon charts, one series per
    algorithm.  Returns the list of written file paths."""
    if not rows:
        raise EmptySelection("no result rows")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for field, label, logx in (("K", "K (trajectories)", True), ("epsilon", "epsilon (corruption level)", False)):
        series = aggregate(rows, field)
        if not series:
            raise EmptySelection("all rows are error rows")
        svg = line_chart(series, xlabel=label, ylabel="SubOpt",
                         title=f"Mean SubOpt vs {field} (+/- stderr)", logx=logx)
        path = os.path.join(out_dir, f"subopt_vs_{field}.svg")
        with open(path, "w") as fh:
            fh.write(svg)
        written.append(path)
    return written
