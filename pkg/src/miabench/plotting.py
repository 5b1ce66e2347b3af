"""Static SVG rendering of privacy-utility frontiers, no plotting dependency."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 24, 52
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _bounds(series):
    xs, ys = [], []
    for _, points in series:
        for p in points:
            xs += [p.mean_accuracy - p.ci_accuracy, p.mean_accuracy + p.ci_accuracy]
            ys += [p.mean_p_err - p.ci_p_err, p.mean_p_err + p.ci_p_err]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    xpad = (x1 - x0) * 0.06 or 0.05
    ypad = (y1 - y0) * 0.06 or 0.05
    return x0 - xpad, x1 + xpad, y0 - ypad, y1 + ypad


def _star_points(cx, cy, outer=6.5, inner=2.6):
    pts = []
    for i in range(10):
        r = outer if i % 2 == 0 else inner
        angle = math.pi / 2 + i * math.pi / 5
        pts.append(f"{cx + r * math.cos(angle):.2f},{cy - r * math.sin(angle):.2f}")
    return " ".join(pts)


def _triangle_points(cx, cy, r=6.0):
    pts = []
    for i in range(3):
        angle = math.pi / 2 + i * 2 * math.pi / 3
        pts.append(f"{cx + r * math.cos(angle):.2f},{cy - r * math.sin(angle):.2f}")
    return " ".join(pts)


def render_frontier_svg(series):
    """series: list of (label, frontier points); x is accuracy, y is P_err.

    First epoch is a triangle, last a star, the rest circles, joined by a dotted
    polyline with CI cross-hairs at each point.
    """
    if not series or any(not points for _, points in series):
        raise ValueError("every series needs at least one point")
    x0, x1, y0, y1 = _bounds(series)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w

    def sy(y):
        return HEIGHT - MARGIN_BOTTOM - (y - y0) / (y1 - y0) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
           f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    axis_y = HEIGHT - MARGIN_BOTTOM
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{WIDTH - MARGIN_RIGHT}" '
               f'y2="{axis_y}" stroke="black"/>')
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
               f'y2="{axis_y}" stroke="black"/>')
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        px, py = sx(fx), sy(fy)
        out.append(f'<line x1="{px:.2f}" y1="{axis_y}" x2="{px:.2f}" '
                   f'y2="{axis_y + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{axis_y + 18}" font-size="11" '
                   f'text-anchor="middle">{fx:.3g}</text>')
        out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{py:.2f}" x2="{MARGIN_LEFT}" '
                   f'y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{py + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{fy:.3g}</text>')
    out.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.2f}" y="{HEIGHT - 14}" '
               f'font-size="13" text-anchor="middle">test accuracy</text>')
    out.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.2f}" font-size="13" '
               f'text-anchor="middle" transform="rotate(-90 16 '
               f'{MARGIN_TOP + plot_h / 2:.2f})">attack P_err</text>')

    for idx, (label, points) in enumerate(series):
        colour = PALETTE[idx % len(PALETTE)]
        coords = [(sx(p.mean_accuracy), sy(p.mean_p_err)) for p in points]
        if len(coords) > 1:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" '
                       f'stroke-dasharray="2 4" stroke-width="1"/>')
        for p, (px, py) in zip(points, coords):
            if p.ci_accuracy > 0.0:
                out.append(f'<line class="ci" x1="{sx(p.mean_accuracy - p.ci_accuracy):.2f}" '
                           f'y1="{py:.2f}" x2="{sx(p.mean_accuracy + p.ci_accuracy):.2f}" '
                           f'y2="{py:.2f}" stroke="{colour}" stroke-width="0.8"/>')
            if p.ci_p_err > 0.0:
                out.append(f'<line class="ci" x1="{px:.2f}" '
                           f'y1="{sy(p.mean_p_err - p.ci_p_err):.2f}" x2="{px:.2f}" '
                           f'y2="{sy(p.mean_p_err + p.ci_p_err):.2f}" '
                           f'stroke="{colour}" stroke-width="0.8"/>')
        for i, (p, (px, py)) in enumerate(zip(points, coords)):
            if i == 0:
                out.append(f'<polygon class="marker-triangle" '
                           f'points="{_triangle_points(px, py)}" fill="{colour}"/>')
            elif i == len(points) - 1:
                out.append(f'<polygon class="marker-star" '
                           f'points="{_star_points(px, py)}" fill="{colour}"/>')
            else:
                out.append(f'<circle class="marker-circle" cx="{px:.2f}" '
                           f'cy="{py:.2f}" r="3" fill="{colour}"/>')
        ly = MARGIN_TOP + 14 + 16 * idx
        lx = WIDTH - MARGIN_RIGHT - 150
        out.append(f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" '
                   f'fill="{colour}"/>')
        out.append(f'<text x="{lx + 15}" y="{ly}" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
