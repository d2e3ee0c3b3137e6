"""Minimal self-contained SVG line plots."""
from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
W, H = 640, 400
ML, MR, MT, MB = 70, 150, 30, 45


def wants_log(values: Sequence[float]) -> bool:
    pos = [v for v in values if v > 0 and math.isfinite(v)]
    if not pos:
        return False
    return min(pos) < 1e-3 * max(pos)


def _num(v: float) -> str:
    return f"{v:.2f}"


def line_plot(series: Mapping[str, tuple], title: str = "", xlabel: str = "n", ylabel: str = "",
              logy: bool | None = None, dashed: Sequence[str] = ()) -> str:
    """Render ``{name: (xs, ys)}`` as an SVG document string.

    With ``logy`` unset, a log y-axis is used when the smallest positive
    value is below 1e-3 of the largest. Non-finite points, and non-positive
    points on a log axis, break the polyline.
    """
    ys_all = [float(y) for _, ys in series.values() for y in ys]
    xs_all = [float(x) for xs, _ in series.values() for x in xs]
    if logy is None:
        logy = wants_log(ys_all)

    def ty(v):
        if not math.isfinite(v) or (logy and v <= 0):
            return None
        return math.log10(v) if logy else v

    tys = [t for t in map(ty, ys_all) if t is not None]
    xs_f = [x for x in xs_all if math.isfinite(x)]
    x0, x1 = (min(xs_f), max(xs_f)) if xs_f else (0.0, 1.0)
    y0, y1 = (min(tys), max(tys)) if tys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - x0) / (x1 - x0) * pw

    def py(t):
        return MT + (1.0 - (t - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{_num(px(xv))}" y="{H - MB + 16}" text-anchor="middle" font-size="11">{xv:.4g}</text>')
        tv = y0 + (y1 - y0) * k / 4
        label = f"1e{tv:.1f}" if logy else f"{tv:.4g}"
        out.append(f'<text x="{ML - 6}" y="{_num(py(tv) + 4)}" text-anchor="end" font-size="11">{label}</text>')
    out.append(f'<text x="{ML + pw / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{MT + ph / 2:.1f}" font-size="12" transform="rotate(-90 14 {MT + ph / 2:.1f})" '
                   f'text-anchor="middle">{escape(ylabel + (" (log10)" if logy else ""))}</text>')
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[idx % len(PALETTE)]
        dash = ' stroke-dasharray="5,4"' if name in dashed else ""
        runs, cur = [], []
        for x, y in zip(xs, ys):
            t = ty(float(y))
            if t is None or not math.isfinite(float(x)):
                if cur:
                    runs.append(cur)
                cur = []
                continue
            cur.append(f"{_num(px(float(x)))},{_num(py(t))}")
        if cur:
            runs.append(cur)
        for pts in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{" ".join(pts)}"/>')
        ly = MT + 14 + 18 * idx
        out.append(f'<line x1="{W - MR + 10}" y1="{ly}" x2="{W - MR + 30}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{W - MR + 35}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
