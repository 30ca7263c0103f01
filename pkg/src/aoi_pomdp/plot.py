"""Minimal SVG line charts with error whiskers (no plotting dependency)."""

from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 55


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_chart_svg(series, xlabel, ylabel, title="", comments=()):
    """Render ``series`` as an SVG document string.

    Args:
        series: list of ``(label, xs, ys, errs)``; ``errs`` may be None.
        comments: lines embedded as XML comments at the top of the file.
    """
    xs_all = [x for _, xs, _, _ in series for x in xs]
    lows = [y - (e[i] if e else 0.0) for _, _, ys, e in series for i, y in enumerate(ys)]
    highs = [y + (e[i] if e else 0.0) for _, _, ys, e in series for i, y in enumerate(ys)]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(lows), max(highs)
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    out += [f"<!-- {escape(c)} -->" for c in comments]
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">')
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(t):.2f}" y1="{TOP + plot_h}" x2="{px(t):.2f}" y2="{TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{TOP + plot_h + 18}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{LEFT - 5}" y1="{py(t):.2f}" x2="{LEFT}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{TOP + plot_h / 2:.1f}" text-anchor="middle" transform="rotate(-90 18 {TOP + plot_h / 2:.1f})">{escape(ylabel)}</text>')

    for n, (label, xs, ys, errs) in enumerate(series):
        color = COLORS[n % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for i, (x, y) in enumerate(zip(xs, ys)):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
            if errs:
                lo, hi = py(y - errs[i]), py(y + errs[i])
                out.append(f'<line x1="{px(x):.2f}" y1="{lo:.2f}" x2="{px(x):.2f}" y2="{hi:.2f}" stroke="{color}"/>')
                for yy in (lo, hi):
                    out.append(f'<line x1="{px(x) - 4:.2f}" y1="{yy:.2f}" x2="{px(x) + 4:.2f}" y2="{yy:.2f}" stroke="{color}"/>')
        ly = TOP + 15 + 18 * n
        lx = WIDTH - RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
