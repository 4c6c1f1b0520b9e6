"""Plain-text export of projected 2-D trajectories (SVG and CSV)."""

from __future__ import annotations

import csv
import io

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _star(cx: float, cy: float, r: float) -> str:
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else r * 0.45
        ang = -np.pi / 2 + k * np.pi / 5
        pts.append(f"{cx + rad * np.cos(ang):.3f},{cy + rad * np.sin(ang):.3f}")
    return " ".join(pts)


def trajectories_svg(trajectories, start=None, size: int = 480, margin: int = 24, title: str = "") -> str:
    """One polyline per ``(N, 2)`` trajectory, a dot at each trajectory's first
    point, and a star at ``start`` when given."""
    trajs = [np.asarray(t, dtype=np.float64) for t in trajectories]
    if not trajs:
        raise ValueError("nothing to plot")
    pts = np.concatenate(trajs + ([np.asarray(start, dtype=np.float64)[None]] if start is not None else []))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(np.max(hi - lo)) or 1.0
    inner = size - 2 * margin

    def to_px(p):
        x = margin + (p[..., 0] - lo[0]) / span * inner
        y = size - margin - (p[..., 1] - lo[1]) / span * inner
        return x, y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for i, t in enumerate(trajs):
        x, y = to_px(t)
        color = PALETTE[i % len(PALETTE)]
        path = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<circle cx="{x[0]:.3f}" cy="{y[0]:.3f}" r="3" fill="{color}"/>')
    if start is not None:
        sx, sy = to_px(np.asarray(start, dtype=np.float64))
        out.append(f'<polygon fill="black" points="{_star(float(sx), float(sy), 9.0)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectories_csv(trajectories, labels=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory", "label", "frame", "x", "y"])
    for i, t in enumerate(trajectories):
        lab = "" if labels is None else labels[i]
        for j, (x, y) in enumerate(np.asarray(t, dtype=np.float64)):
            w.writerow([i, lab, j, repr(float(x)), repr(float(y))])
    return buf.getvalue()
