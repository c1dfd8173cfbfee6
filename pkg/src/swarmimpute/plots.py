"""Standalone SVG charts: actual-vs-estimate scatter and time per sample."""
from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

from .errors import EmptyReport

SIZE = 400
MARGIN = 50


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]


def _axes(x_label: str, y_label: str, x_range, y_range) -> list[str]:
    lo, hi = MARGIN, SIZE - MARGIN
    out = [
        f'<line x1="{lo}" y1="{hi}" x2="{hi}" y2="{hi}" stroke="black"/>',
        f'<line x1="{lo}" y1="{lo}" x2="{lo}" y2="{hi}" stroke="black"/>',
        f'<text x="{SIZE / 2}" y="{SIZE - 12}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="14" y="{SIZE / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {SIZE / 2})">{escape(y_label)}</text>',
    ]
    for value, frac in ((x_range[0], 0.0), (x_range[1], 1.0)):
        out.append(f'<text x="{lo + frac * (hi - lo):.2f}" y="{hi + 15}" text-anchor="middle">{value:.4g}</text>')
    for value, frac in ((y_range[0], 0.0), (y_range[1], 1.0)):
        out.append(f'<text x="{lo - 5}" y="{hi - frac * (hi - lo) + 4:.2f}" text-anchor="end">{value:.4g}</text>')
    return out


def _scale(values, vmin, vmax, flip=False):
    lo, hi = MARGIN, SIZE - MARGIN
    span = (vmax - vmin) or 1.0
    frac = (np.asarray(values, dtype=np.float64) - vmin) / span
    return hi - frac * (hi - lo) if flip else lo + frac * (hi - lo)


def scatter_svg(actual, estimate, title: str = "Actual vs estimated values") -> str:
    """Points at (actual, estimate) on the unit square with the diagonal drawn."""
    xs = _scale(actual, 0.0, 1.0)
    ys = _scale(estimate, 0.0, 1.0, flip=True)
    lo, hi = MARGIN, SIZE - MARGIN
    lines = _header(title) + _axes("actual", "estimate", (0, 1), (0, 1))
    lines.append(f'<line class="diagonal" x1="{lo}" y1="{hi}" x2="{hi}" y2="{lo}" '
                 f'stroke="gray" stroke-dasharray="4 3"/>')
    for x, y in zip(xs, ys):
        lines.append(f'<circle class="point" cx="{x:.2f}" cy="{y:.2f}" r="2" fill="#1f77b4"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def timing_svg(seconds, title: str = "Time per sample") -> str:
    """Line chart of wall time against position in the report."""
    seconds = np.asarray(seconds, dtype=np.float64)
    top = float(seconds.max()) if seconds.size and seconds.max() > 0 else 1.0
    n = max(seconds.size - 1, 1)
    xs = _scale(np.arange(seconds.size), 0, n)
    ys = _scale(seconds, 0.0, top, flip=True)
    lines = _header(title) + _axes("sample", "seconds", (0, n), (0, top))
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    lines.append(f'<polyline class="series" points="{points}" fill="none" stroke="#d62728"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_plots(report, out_dir, prefix: str | None = None) -> list[Path]:
    """Write ``<prefix>-scatter.svg`` and ``<prefix>-times.svg``; returns the paths."""
    if not report.rows:
        raise EmptyReport(f"report {report.method!r} has no rows to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = prefix or report.method or "report"
    scatter = out_dir / f"{prefix}-scatter.svg"
    times = out_dir / f"{prefix}-times.svg"
    scatter.write_text(scatter_svg([r.actual for r in report.rows], [r.estimate for r in report.rows]))
    times.write_text(timing_svg([s for _, s in report.per_sample_times]))
    return [scatter, times]
