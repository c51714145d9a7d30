"""Static SVG line plots with a logarithmic y axis, no renderer required."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from dgne.errors import EmptySeries
from dgne.solver import read_trajectory_csv

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 190, 30, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _series(csv_paths, columns, labels):
    out = []
    for p_idx, path in enumerate(csv_paths):
        data = read_trajectory_csv(path)
        if "iter" not in data or data["iter"].size == 0:
            raise EmptySeries(f"{path}: no rows")
        for col in columns:
            if col not in data:
                raise EmptySeries(f"{path}: no column {col!r}")
            y = data[col]
            mask = np.isfinite(y)
            if not mask.any():
                raise EmptySeries(f"{path}: column {col!r} has no values")
            if labels is not None:
                label = labels[len(out)]
            elif len(csv_paths) > 1:
                label = f"{Path(path).stem}:{col}"
            else:
                label = col
            out.append((label, data["iter"][mask], y[mask]))
    return out


def emit_svg_plot(csv_paths: Sequence, columns: Sequence[str], out_path,
                  labels: Sequence[str] | None = None, title: str | None = None) -> Path:
    """Overlay ``columns`` of every CSV on a log-y plot, one polyline each.

    Series appear in the legend in input order (files outer, columns inner).
    Nonpositive values cannot sit on a log axis: they are clipped to a floor
    one decade below the smallest positive value plotted, and the plot says so.
    """
    csv_paths = list(csv_paths)
    columns = list(columns)
    if not csv_paths or not columns:
        raise EmptySeries("nothing to plot")
    if labels is not None and len(labels) != len(csv_paths) * len(columns):
        raise ValueError("need one label per (file, column) pair")
    series = _series(csv_paths, columns, labels)

    positives = np.concatenate([y[y > 0] for _, _, y in series])
    floor = float(positives.min()) / 10.0 if positives.size else 1e-16
    clipped = any(np.any(y <= 0) for _, _, y in series)
    logs = [(lab, x, np.log10(np.maximum(y, floor))) for lab, x, y in series]

    x_lo = min(float(x.min()) for _, x, _ in logs)
    x_hi = max(float(x.max()) for _, x, _ in logs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo = math.floor(min(float(y.min()) for _, _, y in logs))
    y_hi = math.ceil(max(float(y.max()) for _, _, y in logs))
    if y_hi == y_lo:
        y_hi = y_lo + 1

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(ly):
        return MARGIN_T + (y_hi - ly) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="18" text-anchor="middle">'
                     f'{escape(title)}</text>')
    # axes
    parts.append(f'<g class="axes" stroke="black" fill="none">'
                 f'<line x1="{MARGIN_L}" y1="{MARGIN_T + ph}" x2="{MARGIN_L + pw}" '
                 f'y2="{MARGIN_T + ph}"/>'
                 f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{MARGIN_T + ph}"/></g>')
    # y ticks at decades, thinned to at most ~10 labels
    stride = max(1, math.ceil((y_hi - y_lo) / 10))
    for e in range(y_lo, y_hi + 1, stride):
        y = sy(e)
        parts.append(f'<line class="ytick" x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    # x ticks, 6 evenly spaced
    for t in np.linspace(x_lo, x_hi, 6):
        x = sx(t)
        parts.append(f'<line class="xtick" x1="{x:.2f}" y1="{MARGIN_T + ph}" x2="{x:.2f}" '
                     f'y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 20}" text-anchor="middle">'
                     f'{t:.6g}</text>')
    parts.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 15}" '
                 f'text-anchor="middle">iteration</text>')

    for idx, (label, x, ly) in enumerate(logs):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, ly))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"><title>{escape(label)}</title></polyline>')
    # legend
    lx = MARGIN_L + pw + 15
    parts.append('<g class="legend">')
    for idx, (label, _, _) in enumerate(logs):
        ly = MARGIN_T + 10 + 20 * idx
        color = PALETTE[idx % len(PALETTE)]
        parts.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="4" fill="{color}"/>'
                     f'<text x="{lx + 20}" y="{ly}">{escape(label)}</text>')
    parts.append("</g>")
    if clipped:
        parts.append(f'<text class="warning" x="{MARGIN_L + 5}" y="{MARGIN_T + ph - 8}" '
                     f'fill="#b00">warning: values &lt;= 0 clipped to {floor:.3g}</text>')
    parts.append("</svg>")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(parts) + "\n")
    return out_path
