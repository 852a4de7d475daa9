"""SVG rendering of figure bundles (scatter, arrows, contours, ellipses)."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

import numpy as np

from .experiments import FigureBundle, ellipse_axes
from .geometry import InvalidInputError

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
SIZE = 480
MARGIN = 30
BAR_HEIGHT = 90


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Frame:
    def __init__(self, pts):
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1])) or 1.0
        self.lo = lo
        self.scale = (SIZE - 2 * MARGIN) / span

    def __call__(self, p):
        x = MARGIN + (p[0] - self.lo[0]) * self.scale
        y = SIZE - MARGIN - (p[1] - self.lo[1]) * self.scale
        return x, y


def _extent(bundle):
    parts = [np.asarray(bundle.points, dtype=float)]
    if bundle.stars is not None:
        parts.append(np.asarray(bundle.stars, dtype=float))
    for _, poly in bundle.boundaries:
        parts.append(np.asarray(poly, dtype=float))
    if bundle.ellipse is not None:
        c, A = bundle.ellipse
        r = float(ellipse_axes(A)[0].max())
        parts.append(np.asarray(c) + np.array([[-r, -r], [r, r]]))
    return np.vstack(parts)


def _star(x, y, r):
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else 0.45 * r
        a = math.pi / 2 + k * math.pi / 5
        pts.append(f"{_fmt(x + rad * math.cos(a))},{_fmt(y - rad * math.sin(a))}")
    return " ".join(pts)


def emit_svg(bundle: FigureBundle) -> str:
    """Render a 2-D bundle; element order is fixed so output is reproducible."""
    if bundle is None or bundle.is_empty():
        raise InvalidInputError("empty figure bundle")
    pts = np.asarray(bundle.points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError("figures are 2D only")
    labels = np.asarray(bundle.labels)
    classes = sorted(set(labels.tolist()))
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    frame = _Frame(_extent(bundle))
    height = SIZE + (BAR_HEIGHT if bundle.bars else 0)

    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "version": "1.1",
                             "width": str(SIZE), "height": str(height),
                             "viewBox": f"0 0 {SIZE} {height}"})
    ET.SubElement(svg, "title").text = bundle.title
    defs = ET.SubElement(svg, "defs")
    ET.SubElement(defs, "style").text = (
        ".boundary{fill:none;stroke-width:1.5;stroke-dasharray:5,4}"
        ".arrow line{stroke:#333;stroke-width:1.2}.arrow polygon{fill:#333}"
        ".ellipse{fill:none;stroke:#2ca02c;stroke-width:2}")

    for c, poly in bundle.boundaries:
        d = " ".join(("M" if k == 0 else "L") + "{},{}".format(*map(_fmt, frame(p)))
                     for k, p in enumerate(np.asarray(poly))) + " Z"
        ET.SubElement(svg, "path", {"class": "boundary", "d": d,
                                    "stroke": color.get(c, "#555"), "data-class": str(c)})

    if bundle.ellipse is not None:
        c, A = bundle.ellipse
        radii, axes = ellipse_axes(A)
        cx, cy = frame(c)
        angle = -math.degrees(math.atan2(axes[1, 0], axes[0, 0]))
        ET.SubElement(svg, "ellipse", {
            "class": "ellipse", "cx": _fmt(cx), "cy": _fmt(cy),
            "rx": _fmt(radii[0] * frame.scale), "ry": _fmt(radii[1] * frame.scale),
            "transform": f"rotate({_fmt(angle)} {_fmt(cx)} {_fmt(cy)})"})

    for a, b in bundle.arrows:
        x0, y0 = frame(a)
        x1, y1 = frame(b)
        g = ET.SubElement(svg, "g", {"class": "arrow"})
        ET.SubElement(g, "line", {"x1": _fmt(x0), "y1": _fmt(y0), "x2": _fmt(x1), "y2": _fmt(y1)})
        L = math.hypot(x1 - x0, y1 - y0) or 1.0
        ux, uy = (x1 - x0) / L, (y1 - y0) / L
        h = min(8.0, 0.5 * L)
        head = [(x1, y1), (x1 - h * ux + 0.5 * h * uy, y1 - h * uy - 0.5 * h * ux),
                (x1 - h * ux - 0.5 * h * uy, y1 - h * uy + 0.5 * h * ux)]
        ET.SubElement(g, "polygon", {"points": " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in head)})

    if bundle.triplet is not None:
        a, p, n = bundle.triplet
        g = ET.SubElement(svg, "g", {"class": "triplet"})
        for j, role in ((p, "positive"), (n, "negative")):
            x0, y0 = frame(pts[a])
            x1, y1 = frame(pts[j])
            ET.SubElement(g, "line", {"x1": _fmt(x0), "y1": _fmt(y0), "x2": _fmt(x1),
                                      "y2": _fmt(y1), "stroke": "#000",
                                      "stroke-dasharray": "2,2" if role == "negative" else "none"})
        for j, role in ((a, "anchor"), (p, "positive"), (n, "negative")):
            x, y = frame(pts[j])
            ET.SubElement(g, "text", {"x": _fmt(x + 7), "y": _fmt(y - 7),
                                      "font-size": "11"}).text = role

    for k, p in enumerate(pts):
        x, y = frame(p)
        ET.SubElement(svg, "circle", {"class": "point", "cx": _fmt(x), "cy": _fmt(y), "r": "5",
                                      "fill": color[labels[k]], "data-index": str(k)})

    if bundle.stars is not None:
        for k, p in enumerate(np.asarray(bundle.stars, dtype=float)):
            x, y = frame(p)
            ET.SubElement(svg, "polygon", {"class": "star", "points": _star(x, y, 7),
                                           "fill": color[labels[k]], "data-index": str(k)})

    if bundle.bars:
        top = max(b["discrepancy"] for b in bundle.bars) or 1.0
        width = (SIZE - 2 * MARGIN) / len(bundle.bars)
        base = height - 10
        for k, b in enumerate(bundle.bars):
            h = (BAR_HEIGHT - 20) * b["discrepancy"] / top
            ET.SubElement(svg, "rect", {
                "class": "bar", "x": _fmt(MARGIN + k * width), "y": _fmt(base - h),
                "width": _fmt(0.8 * width), "height": _fmt(h),
                "fill": "#000" if k == 0 else "#999",
                "data-pair": "{},{}".format(*b["pair"])})

    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"
