"""SVG rendering of farms, machine routes and convergence curves."""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .instgen import navgraph_for, shortest_distances
from .model import Instance, Solution

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
CANVAS = 800.0
MARGIN = 40.0
LEGEND_ROW = 18.0


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


class _Frame:
    """Maps farm meters to canvas pixels with y pointing up."""

    def __init__(self, points: np.ndarray):
        lo, hi = points.min(axis=0), points.max(axis=0)
        span = max(float((hi - lo).max()), 1e-9)
        self.scale = (CANVAS - 2 * MARGIN) / span
        self.lo, self.hi = lo, hi

    def __call__(self, p) -> tuple[float, float]:
        x = MARGIN + (p[0] - self.lo[0]) * self.scale
        y = MARGIN + (self.hi[1] - p[1]) * self.scale
        return x, y

    def path(self, pts) -> str:
        return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (self(p) for p in pts))


def _leg_router(inst: Instance):
    """Return a function giving the polyline between two (node, entrance) points.

    Legs follow headland shortest paths when the headland graph rebuilt from
    the geometry reproduces the stored tensor; otherwise straight segments.
    """
    try:
        graph, ids = navgraph_for(inst)
        ok = np.allclose(shortest_distances(graph, ids), inst.tensor, rtol=1e-9, atol=1e-6)
    except ValueError:
        ok = False
    if not ok:
        return lambda a, b: [inst.entrance_xy(*a), inst.entrance_xy(*b)]

    def route(a, b):
        u, v = ids[a[0]][a[1]], ids[b[0]][b[1]]
        return [tuple(graph.vertices[w]) for w in graph.shortest_path(u, v)]

    return route


def machine_polyline(inst: Instance, route, router=None) -> list[tuple[float, float]]:
    if not route:
        return [inst.depot.xy, inst.depot.xy]
    router = router or _leg_router(inst)
    pts: list = []
    here = (0, 0)
    for line_id, ent in route:
        pts.extend(router(here, (line_id, ent)))
        pts.append(inst.entrance_xy(line_id, 1 - ent))
        here = (line_id, 1 - ent)
    pts.extend(router(here, (0, 0)))
    return pts


def render_solution(inst: Instance, solution: Solution, title: str = "") -> str:
    if not inst.has_geometry:
        raise ValueError("instance has no coordinates to draw")
    pts = [inst.depot.xy]
    for f in inst.fields:
        pts.extend(f.polygon)
    for ln in inst.lines:
        pts.extend([ln.entrance0_xy, ln.entrance1_xy])
    frame = _Frame(np.asarray(pts, dtype=float))
    router = _leg_router(inst)
    height = CANVAS + LEGEND_ROW * (len(solution.routes) + 1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(CANVAS)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(CANVAS)} {_fmt(height)}">',
        f"<title>{escape(title)}</title>",
        '<g id="fields">',
    ]
    for f in inst.fields:
        out.append(f'<polygon data-field="{f.id}" points="{frame.path(f.polygon)}" fill="#eef5e6" stroke="#6b8e23"/>')
    out.append("</g>")
    out.append('<g id="lines" stroke="#555" stroke-dasharray="4 3">')
    for ln in inst.lines:
        (x0, y0), (x1, y1) = frame(ln.entrance0_xy), frame(ln.entrance1_xy)
        out.append(f'<line data-line="{ln.id}" x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}"/>')
    out.append("</g>")

    out.append('<g id="routes" fill="none" stroke-width="2">')
    for k, route in enumerate(solution.routes):
        color = PALETTE[k % len(PALETTE)]
        poly = machine_polyline(inst, route, router)
        out.append(f'<polyline data-machine="{k + 1}" stroke="{color}" points="{frame.path(poly)}"/>')
    out.append("</g>")

    out.append('<g id="entrances" stroke="#000">')
    for ln in inst.lines:
        for ent, fill in ((0, "#fff"), (1, "#000")):
            x, y = frame(inst.entrance_xy(ln.id, ent))
            out.append(f'<circle data-line="{ln.id}" data-entrance="{ent}" cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{fill}"/>')
    out.append("</g>")

    dx, dy = frame(inst.depot.xy)
    star = []
    for i in range(10):
        r = 10.0 if i % 2 == 0 else 4.0
        a = np.pi / 2 + i * np.pi / 5
        star.append(f"{_fmt(dx + r * np.cos(a))},{_fmt(dy - r * np.sin(a))}")
    out.append(f'<polygon id="depot" points="{" ".join(star)}" fill="#f5c400" stroke="#000"/>')

    out.append('<g id="legend" font-family="sans-serif" font-size="12">')
    for k, (route, metrics) in enumerate(zip(solution.routes, solution.per_machine)):
        y = CANVAS + LEGEND_ROW * (k + 1)
        color = PALETTE[k % len(PALETTE)]
        label = f"machine {k + 1}: {len(route)} lines, idle {metrics.s_k:.1f} m"
        out.append(f'<line x1="{_fmt(MARGIN)}" y1="{_fmt(y - 4)}" x2="{_fmt(MARGIN + 20)}" y2="{_fmt(y - 4)}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text data-machine="{k + 1}" x="{_fmt(MARGIN + 26)}" y="{_fmt(y)}">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_convergence(values: Sequence[float], title: str = "", label: Optional[str] = None) -> str:
    """Best objective per iteration.

    The curve is written in data coordinates (x = iteration starting at 1,
    y = objective) and mapped to the canvas by a group transform.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("convergence trace is empty")
    width, height = 640.0, 400.0
    x_lo, x_hi = 1.0, float(max(vals.size, 2))
    y_lo, y_hi = float(vals.min()), float(vals.max())
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    sx = (width - 2 * MARGIN) / (x_hi - x_lo)
    sy = (height - 2 * MARGIN) / (y_hi - y_lo)
    transform = f"translate({MARGIN!r},{height - MARGIN!r}) scale({sx!r},{-sy!r}) translate({-x_lo!r},{-y_lo!r})"
    points = " ".join(f"{i + 1},{v!r}" for i, v in enumerate(vals.tolist()))
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
            f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
            f"<title>{escape(title)}</title>",
            f'<rect x="{_fmt(MARGIN)}" y="{_fmt(MARGIN)}" width="{_fmt(width - 2 * MARGIN)}" '
            f'height="{_fmt(height - 2 * MARGIN)}" fill="none" stroke="#999"/>',
            f'<g id="curve" transform="{transform}">',
            f'<polyline points="{points}" fill="none" stroke="#1f77b4" stroke-width="2" vector-effect="non-scaling-stroke"/>',
            "</g>",
            f'<text x="{_fmt(MARGIN)}" y="{_fmt(MARGIN - 8)}" font-family="sans-serif" font-size="12">'
            f"{escape(label or 'best objective')}: {vals[0]:.3f} to {vals[-1]:.3f}</text>",
            f'<text x="{_fmt(width - MARGIN)}" y="{_fmt(height - 12)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="12">iteration 1 to {vals.size}</text>',
            "</svg>",
        ]
    ) + "\n"
