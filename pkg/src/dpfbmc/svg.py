"""Minimal SVG line plots for result tables."""
import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def line_plot(series, path, xlabel="", ylabel="", title="", logy=False, width=640, height=420):
    """Write ``series`` = [(label, xs, ys)] as an SVG polyline chart.

    Non-positive values are dropped on a log axis.
    """
    pts = []
    for label, xs, ys in series:
        keep = [(float(x), float(y)) for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y) and (y > 0 or not logy)]
        pts.append((label, keep))
    allx = [x for _, p in pts for x, _ in p] or [0.0, 1.0]
    ally = [(math.log10(y) if logy else y) for _, p in pts for _, y in p] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        v = math.log10(y) if logy else y
        return mt + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {mt + ph / 2:.1f})">{escape(ylabel)}</text>']
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        out.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 15}" text-anchor="middle">{xv:g}</text>')
    ticks = range(int(y0), int(y1) + 1) if logy else [y0 + (y1 - y0) * i / 5 for i in range(6)]
    for t in ticks:
        yy = mt + (1 - (t - y0) / (y1 - y0)) * ph
        lab = f"1e{int(t)}" if logy else f"{t:g}"
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{yy:.1f}" y2="{yy:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 5}" y="{yy + 4:.1f}" text-anchor="end">{lab}</text>')
    for k, (label, p) in enumerate(pts):
        c = _COLORS[k % len(_COLORS)]
        if p:
            coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        ly = mt + 14 * (k + 1)
        out.append(f'<line x1="{ml + pw + 10}" x2="{ml + pw + 30}" y1="{ly}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
