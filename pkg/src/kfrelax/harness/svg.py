"""Self-contained SVG line charts (no plotting dependency)."""
import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def emit_svg(series, title="", xlabel="step", ylabel="", log_y=False, width=640, height=400):
    """Render ``{label: (xs, ys)}`` as an SVG document string.

    With ``log_y`` the values are plotted as log10 (non-positive points dropped).
    """
    if not series or all(len(xs) == 0 for xs, _ in series.values()):
        raise ValueError("nothing to plot")
    prepared = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)]
        if log_y:
            pts = [(x, math.log10(y)) for x, y in pts if y > 0]
        pts = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
        if pts:
            prepared[label] = pts
    if not prepared:
        raise ValueError("no finite points to plot")
    all_x = [x for pts in prepared.values() for x, _ in pts]
    all_y = [y for pts in prepared.values() for _, y in pts]
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for ty in _ticks(y0, y1):
        label = f"1e{ty:.2g}" if log_y else f"{ty:.4g}"
        out.append(f'<line x1="{left - 4}" y1="{sy(ty):.2f}" x2="{left}" y2="{sy(ty):.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{sy(ty) + 4:.2f}" text-anchor="end">{escape(label)}</text>')
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{sx(tx):.2f}" y1="{top + ph}" x2="{sx(tx):.2f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{sx(tx):.2f}" y="{top + ph + 16}" text-anchor="middle">{tx:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    ylab = f"log10 {ylabel}" if log_y else ylabel
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylab)}</text>')
    for i, (label, pts) in enumerate(prepared.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def records_to_series(records, metric):
    """Average a metric across seeds, one series per estimator."""
    acc = {}
    for rec in records:
        xs, ys = rec.series(metric)
        bucket = acc.setdefault(rec.estimator, {})
        for x, y in zip(xs, ys):
            bucket.setdefault(x, []).append(y)
    return {
        est: (sorted(b), [sum(b[x]) / len(b[x]) for x in sorted(b)])
        for est, b in acc.items() if b
    }
