"""Minimal static SVG writer: one panel per state coordinate with the mean
curve and a shaded mean +- 2 standard deviation ribbon."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H, MARGIN = 640, 220, 48


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values) - lo) / span * (out_hi - out_lo)


def ribbon_svg(times, means, covs, labels=None, title="") -> str:
    times = np.asarray(times, dtype=float)
    n = means.shape[1]
    labels = labels or [f"x_{i + 1}" for i in range(n)]
    height = n * (PANEL_H + MARGIN) + MARGIN
    width = PANEL_W + 2 * MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN}" y="{MARGIN // 2}">{escape(title)}</text>')
    x = _scale(times, times[0], times[-1], MARGIN, MARGIN + PANEL_W)
    for i in range(n):
        top = MARGIN + i * (PANEL_H + MARGIN)
        sd = np.sqrt(np.clip(covs[:, i, i], 0.0, None))
        upper, lower = means[:, i] + 2 * sd, means[:, i] - 2 * sd
        lo, hi = float(lower.min()), float(upper.max())

        def y(v):
            return _scale(v, lo, hi, top + PANEL_H, top)

        band = [f"{a:.2f},{b:.2f}" for a, b in zip(x, y(upper))]
        band += [f"{a:.2f},{b:.2f}" for a, b in zip(x[::-1], y(lower)[::-1])]
        line = [f"{a:.2f},{b:.2f}" for a, b in zip(x, y(means[:, i]))]
        parts += [
            f'<rect x="{MARGIN}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>',
            f'<polygon points="{" ".join(band)}" fill="#4a90d9" fill-opacity="0.25" stroke="none"/>',
            f'<polyline points="{" ".join(line)}" fill="none" stroke="#1f4e8c" stroke-width="1.5"/>',
            f'<text x="{MARGIN + 4}" y="{top + 14}">{escape(labels[i])}: mean and +-2 sd</text>',
            f'<text x="4" y="{top + 12}">{hi:.3g}</text>',
            f'<text x="4" y="{top + PANEL_H}">{lo:.3g}</text>',
            f'<text x="{MARGIN}" y="{top + PANEL_H + 16}">t={times[0]:.3g}</text>',
            f'<text x="{MARGIN + PANEL_W - 40}" y="{top + PANEL_H + 16}">t={times[-1]:.3g}</text>',
        ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_ribbon_svg(path, times, means, covs, labels=None, title=""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ribbon_svg(times, means, covs, labels, title))
    return path
