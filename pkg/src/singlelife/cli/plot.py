"""Dependency-free SVG chart emitters: heatmap, scatter, line.

SVGs are deterministic text artifacts (no timestamps), so identical inputs
diff clean. The heatmap defaults to the clipped colormap convention used for
alignment matrices: values below the low clip render gray, above the high
clip render white.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

CLIP_LOW = 0.4
CLIP_HIGH = 0.71


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _viridis_like(t: float) -> str:
    """Small fixed gradient (dark blue -> teal -> yellow)."""
    stops = [(0.27, 0.00, 0.33), (0.13, 0.57, 0.55), (0.99, 0.91, 0.14)]
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        a, b, u = stops[0], stops[1], t * 2
    else:
        a, b, u = stops[1], stops[2], (t - 0.5) * 2
    rgb = [int(round(255 * (x + (y - x) * u))) for x, y in zip(a, b)]
    return "#%02x%02x%02x" % tuple(rgb)


def heatmap_svg(values: np.ndarray, labels, clip_low: float = CLIP_LOW,
                clip_high: float = CLIP_HIGH, cell: int = 36) -> str:
    """Square heatmap with row/column labels and clip colors (gray/white)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    margin = 110
    size = margin + n * cell + 10
    rows = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
            f'font-family="monospace" font-size="11">']
    for i in range(n):
        rows.append(f'<text x="{margin - 6}" y="{margin + i * cell + cell * 0.6:.1f}" '
                    f'text-anchor="end">{_esc(labels[i])}</text>')
        rows.append(f'<text x="{margin + i * cell + cell / 2:.1f}" y="{margin - 8}" '
                    f'text-anchor="start" transform="rotate(-45 '
                    f'{margin + i * cell + cell / 2:.1f} {margin - 8})">'
                    f'{_esc(labels[i])}</text>')
        for j in range(n):
            val = v[i, j]
            if val < clip_low:
                color = "#9a9a9a"
            elif val > clip_high:
                color = "#ffffff"
            else:
                span = max(clip_high - clip_low, 1e-9)
                color = _viridis_like((val - clip_low) / span)
            x, y = margin + j * cell, margin + i * cell
            rows.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" '
                        f'height="{cell}" fill="{color}" stroke="#222"/>')
            rows.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell * 0.6:.1f}" '
                        f'text-anchor="middle">{val:.2f}</text>')
    rows.append("</svg>")
    return "\n".join(rows)


def scatter_svg(points, labels, width: int = 420, height: int = 420) -> str:
    """One labeled marker per model."""
    pts = np.asarray(points, dtype=float)
    pad = 50
    lo = pts.min(axis=0) if len(pts) else np.zeros(2)
    hi = pts.max(axis=0) if len(pts) else np.ones(2)
    span = np.maximum(hi - lo, 1e-9)

    def sx(x):
        return pad + (x - lo[0]) / span[0] * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - lo[1]) / span[1] * (height - 2 * pad)

    rows = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" font-family="monospace" font-size="11">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#fdfdfd"/>']
    for (x, y), label in zip(pts, labels):
        rows.append(f'<circle class="marker" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="5" '
                    f'fill="#2a6fb0"/>')
        rows.append(f'<text x="{sx(x) + 7:.2f}" y="{sy(y) - 6:.2f}">{_esc(label)}</text>')
    rows.append("</svg>")
    return "\n".join(rows)


def line_svg(xs, ys, x_label: str = "", y_label: str = "", width: int = 520,
             height: int = 320) -> str:
    """Single polyline chart; x values must be non-decreasing."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    pad = 48
    lo_x, hi_x = xs.min(), xs.max()
    lo_y, hi_y = ys.min(), ys.max()
    span_x = max(hi_x - lo_x, 1e-9)
    span_y = max(hi_y - lo_y, 1e-9)
    px = pad + (xs - lo_x) / span_x * (width - 2 * pad)
    py = height - pad - (ys - lo_y) / span_y * (height - 2 * pad)
    path = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#fdfdfd"/>',
        f'<polyline points="{path}" fill="none" stroke="#b03a2e" stroke-width="1.5"/>',
        f'<text x="{width / 2:.0f}" y="{height - 10}" text-anchor="middle">'
        f'{_esc(x_label)}</text>',
        f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" transform="rotate(-90 '
        f'14 {height / 2:.0f})">{_esc(y_label)}</text>',
        "</svg>",
    ])


def write_svg(svg: str, path) -> Path:
    path = Path(path)
    path.write_text(svg + "\n")
    return path
