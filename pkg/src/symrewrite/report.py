"""Per-seed CSV export and an SVG box-and-whisker chart of test accuracies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import InsufficientDataError
from .evaluation import TEST_NAMES, EvalResult

QUARTILE_METHOD = "linear"  # numpy.percentile default: interpolate between order statistics


@dataclass
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: list[float]


def box_stats(values: Sequence[float]) -> BoxStats:
    """Quartiles by linear interpolation; whiskers reach the most extreme
    points within 1.5 IQR of the box; anything beyond is an outlier."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise InsufficientDataError("no values")
    q1, med, q3 = np.percentile(v, [25, 50, 75], method=QUARTILE_METHOD)
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return BoxStats(float(q1), float(med), float(q3), float(inside.min()), float(inside.max()),
                    [float(x) for x in v if x < lo_fence or x > hi_fence])


def accuracy_csv(results: Sequence[EvalResult]) -> str:
    ok = [r for r in results if r.ok]
    if not ok:
        raise InsufficientDataError("no successful seeds to report")
    lines = [",".join(TEST_NAMES)]
    for r in ok:
        lines.append(",".join(f"{100 * r.accuracy[n]:.2f}" for n in TEST_NAMES))
    return "\n".join(lines) + "\n"


def read_accuracy_csv(text: str) -> dict[str, list[float]]:
    rows = text.strip().splitlines()
    header = rows[0].split(",")
    cols: dict[str, list[float]] = {h: [] for h in header}
    for row in rows[1:]:
        for h, cell in zip(header, row.split(",")):
            cols[h].append(float(cell))
    return cols


def boxplot_svg(columns: dict[str, Sequence[float]], title: str = "") -> str:
    width, height = 560, 380
    left, right, top, bottom = 60, 20, 40, 50
    plot_h = height - top - bottom
    slot = (width - left - right) / len(columns)

    def y(pct: float) -> float:
        return top + plot_h * (1.0 - pct / 100.0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f"<desc>Accuracy (%) per test set across seeds. Quartiles: {QUARTILE_METHOD} "
        "interpolation; whiskers: most extreme points within 1.5 IQR; dots: outliers.</desc>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for tick in range(0, 101, 20):
        ty = y(tick)
        out.append(f'<line x1="{left}" y1="{ty:.2f}" x2="{width - right}" y2="{ty:.2f}" '
                   'stroke="#dddddd"/>')
        out.append(f'<text x="{left - 8}" y="{ty + 4:.2f}" text-anchor="end">{tick}</text>')
    out.append(f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">Accuracy (%)</text>')
    for i, (name, values) in enumerate(columns.items()):
        s = box_stats(values)
        cx = left + slot * (i + 0.5)
        half = slot * 0.22
        out.append(f'<g class="box" data-set="{escape(name)}" data-q1="{s.q1:.4f}" '
                   f'data-median="{s.median:.4f}" data-q3="{s.q3:.4f}" '
                   f'data-whisker-lo="{s.whisker_lo:.4f}" data-whisker-hi="{s.whisker_hi:.4f}">')
        out.append(f'<line x1="{cx:.2f}" y1="{y(s.whisker_hi):.2f}" x2="{cx:.2f}" '
                   f'y2="{y(s.q3):.2f}" stroke="black"/>')
        out.append(f'<line x1="{cx:.2f}" y1="{y(s.q1):.2f}" x2="{cx:.2f}" '
                   f'y2="{y(s.whisker_lo):.2f}" stroke="black"/>')
        for w in (s.whisker_lo, s.whisker_hi):
            out.append(f'<line x1="{cx - half / 2:.2f}" y1="{y(w):.2f}" x2="{cx + half / 2:.2f}" '
                       f'y2="{y(w):.2f}" stroke="black"/>')
        out.append(f'<rect x="{cx - half:.2f}" y="{y(s.q3):.2f}" width="{2 * half:.2f}" '
                   f'height="{y(s.q1) - y(s.q3):.2f}" fill="#9ecae1" stroke="black"/>')
        out.append(f'<line x1="{cx - half:.2f}" y1="{y(s.median):.2f}" x2="{cx + half:.2f}" '
                   f'y2="{y(s.median):.2f}" stroke="#d62728" stroke-width="2"/>')
        for o in s.outliers:
            out.append(f'<circle cx="{cx:.2f}" cy="{y(o):.2f}" r="3" fill="none" stroke="black"/>')
        out.append("</g>")
        out.append(f'<text x="{cx:.2f}" y="{height - bottom + 20}" text-anchor="middle">'
                   f"{escape(name.capitalize())}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
