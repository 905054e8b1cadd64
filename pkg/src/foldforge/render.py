"""Deterministic rendering: crease-pattern and folded views.

Drawing happens in two stages: build a small vector document (filled
polygons and stroked segments in paper coordinates), then rasterize it with
an even-odd scanline fill. Fills get no anti-aliasing so downstream masks are
reproducible bit for bit; framing is fixed (fit content, preserve aspect,
center, 16 px margin) so silhouette comparisons are well-posed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .foldfile import BOUNDARY, FLAT, MOUNTAIN, VALLEY
from .geometry import Point
from .pattern import CreasePattern
from .solver import FoldedState

MARGIN_PX = 16

Color = tuple[int, int, int]


def grayscale(color: Color) -> float:
    r, g, b = color
    return 0.299 * r + 0.587 * g + 0.114 * b


class MissingLayerOrder(Exception):
    pass


@dataclass(frozen=True)
class RenderStyle:
    mountain_color: Color = (0, 0, 255)
    valley_color: Color = (255, 0, 0)
    boundary_color: Color = (0, 0, 0)
    flat_color: Color = (170, 170, 170)
    background: Color = (255, 255, 255)
    front_face_color: Color = (230, 180, 100)
    back_face_color: Color = (250, 240, 210)
    stroke_width: float = 2.0
    draw_folded_creases: bool = False

    def __post_init__(self):
        for name in (
            "mountain_color",
            "valley_color",
            "boundary_color",
            "flat_color",
            "front_face_color",
            "back_face_color",
        ):
            if grayscale(getattr(self, name)) >= 250:
                raise ValueError(f"{name} would vanish under the mask threshold")
        if self.background != (255, 255, 255):
            raise ValueError("background must be pure white")

    def edge_color(self, assignment: str) -> Color:
        return {
            MOUNTAIN: self.mountain_color,
            VALLEY: self.valley_color,
            BOUNDARY: self.boundary_color,
            FLAT: self.flat_color,
        }[assignment]


DEFAULT_STYLE = RenderStyle()


@dataclass
class PolygonElement:
    points: list[Point]
    fill: Color


@dataclass
class StrokeElement:
    p1: Point
    p2: Point
    color: Color
    width: float


@dataclass
class VectorDoc:
    """Ordered drawing elements in paper coordinates (y up)."""

    elements: list = field(default_factory=list)
    background: Color = (255, 255, 255)
    mirrored: bool = False  # flip horizontally when materializing

    def add_polygon(self, points: list[Point], fill: Color) -> None:
        self.elements.append(PolygonElement(list(points), fill))

    def add_stroke(self, p1: Point, p2: Point, color: Color, width: float) -> None:
        self.elements.append(StrokeElement(p1, p2, color, width))

    def content_bbox(self) -> tuple[float, float, float, float] | None:
        xs: list[float] = []
        ys: list[float] = []
        for el in self.elements:
            if isinstance(el, PolygonElement):
                xs.extend(p[0] for p in el.points)
                ys.extend(p[1] for p in el.points)
            else:
                xs.extend((el.p1[0], el.p2[0]))
                ys.extend((el.p1[1], el.p2[1]))
        if not xs:
            return None
        return (min(xs), min(ys), max(xs), max(ys))

    def to_svg(self, width: int = 512, height: int = 512) -> str:
        tf = _framing(self, width, height)
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="{_css(self.background)}"/>',
        ]
        if self.mirrored:
            parts.append(f'<g transform="translate({width},0) scale(-1,1)">')
        for el in self.elements:
            if isinstance(el, PolygonElement):
                pts = " ".join(
                    "%g,%g" % tf(p) for p in el.points
                )
                parts.append(
                    f'<polygon points="{pts}" fill="{_css(el.fill)}" fill-rule="evenodd"/>'
                )
            else:
                (x1, y1), (x2, y2) = tf(el.p1), tf(el.p2)
                parts.append(
                    f'<line x1="{x1:g}" y1="{y1:g}" x2="{x2:g}" y2="{y2:g}" '
                    f'stroke="{_css(el.color)}" stroke-width="{el.width:g}"/>'
                )
        if self.mirrored:
            parts.append("</g>")
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _css(color: Color) -> str:
    return "#%02x%02x%02x" % color


def _framing(doc: VectorDoc, width: int, height: int):
    """Map paper coordinates to pixel coordinates (y flipped)."""
    bbox = doc.content_bbox()
    if bbox is None:
        return lambda p: (0.0, 0.0)
    minx, miny, maxx, maxy = bbox
    bw = maxx - minx
    bh = maxy - miny
    avail_w = width - 2 * MARGIN_PX
    avail_h = height - 2 * MARGIN_PX
    if bw <= 0 and bh <= 0:
        scale = 1.0
    elif bw <= 0:
        scale = avail_h / bh
    elif bh <= 0:
        scale = avail_w / bw
    else:
        scale = min(avail_w / bw, avail_h / bh)
    ox = (width - scale * bw) / 2.0
    oy = (height - scale * bh) / 2.0

    def tf(p: Point) -> tuple[float, float]:
        return (ox + (p[0] - minx) * scale, height - (oy + (p[1] - miny) * scale))

    return tf


@dataclass
class RasterImage:
    """8-bit RGB raster, row-major, top row first."""

    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("raster dimensions must be positive")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError("pixel buffer shape mismatch")

    @classmethod
    def blank(cls, width: int, height: int, color: Color = (255, 255, 255)) -> "RasterImage":
        buf = np.empty((height, width, 3), dtype=np.uint8)
        buf[:, :] = color
        return cls(width, height, buf)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def to_png_bytes(self) -> bytes:
        out = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(out, format="PNG")
        return out.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        arr = np.asarray(img, dtype=np.uint8)
        return cls(img.width, img.height, arr)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_png_bytes())

    @classmethod
    def load(cls, path) -> "RasterImage":
        with open(path, "rb") as fh:
            return cls.from_png_bytes(fh.read())


def rasterize(doc: VectorDoc, width: int = 512, height: int = 512) -> RasterImage:
    """Scanline rasterization: even-odd polygon fill, hard 1-px-edged
    strokes, no anti-aliasing."""
    if width <= 0 or height <= 0:
        raise ValueError("raster dimensions must be positive")
    buf = np.empty((height, width, 3), dtype=np.uint8)
    buf[:, :] = doc.background
    tf = _framing(doc, width, height)
    for el in doc.elements:
        if isinstance(el, PolygonElement):
            _fill_polygon(buf, [tf(p) for p in el.points], el.fill)
        else:
            _draw_stroke(buf, tf(el.p1), tf(el.p2), el.color, el.width)
    if doc.mirrored:
        buf = np.ascontiguousarray(buf[:, ::-1])
    return RasterImage(width, height, buf)


def _fill_polygon(buf: np.ndarray, pts: list[tuple[float, float]], color: Color) -> None:
    if len(pts) < 3:
        return
    height, width = buf.shape[:2]
    ys = [p[1] for p in pts]
    y0 = max(0, int(math.floor(min(ys) - 0.5)))
    y1 = min(height - 1, int(math.ceil(max(ys) + 0.5)))
    n = len(pts)
    for row in range(y0, y1 + 1):
        yc = row + 0.5
        xs: list[float] = []
        for i in range(n):
            x1, yy1 = pts[i]
            x2, yy2 = pts[(i + 1) % n]
            if (yy1 > yc) != (yy2 > yc):
                xs.append(x1 + (yc - yy1) / (yy2 - yy1) * (x2 - x1))
        xs.sort()
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, int(math.ceil(a - 0.5)))
            hi = min(width, int(math.ceil(b - 0.5)))
            if hi > lo:
                buf[row, lo:hi] = color


def _draw_stroke(
    buf: np.ndarray,
    p1: tuple[float, float],
    p2: tuple[float, float],
    color: Color,
    width_px: float,
) -> None:
    height, width = buf.shape[:2]
    r = max(0.5, width_px / 2.0)
    x0 = max(0, int(math.floor(min(p1[0], p2[0]) - r - 1)))
    x1 = min(width - 1, int(math.ceil(max(p1[0], p2[0]) + r + 1)))
    y0 = max(0, int(math.floor(min(p1[1], p2[1]) - r - 1)))
    y1 = min(height - 1, int(math.ceil(max(p1[1], p2[1]) + r + 1)))
    if x1 < x0 or y1 < y0:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    ax, ay = p1
    bx, by = p2
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        t = np.zeros_like(gx)
    else:
        t = np.clip(((gx - ax) * dx + (gy - ay) * dy) / denom, 0.0, 1.0)
    dist = np.hypot(gx - (ax + dx * t), gy - (ay + dy * t))
    mask = dist <= r
    buf[y0 : y1 + 1, x0 : x1 + 1][mask] = color


# -- high-level views ----------------------------------------------------------


def render_crease_pattern(cp: CreasePattern, style: RenderStyle = DEFAULT_STYLE) -> VectorDoc:
    """Crease-pattern view: edges stroked in assignment colors, in index order."""
    doc = VectorDoc(background=style.background)
    for ei, (a, b) in enumerate(cp.edges):
        doc.add_stroke(
            cp.vertices[a],
            cp.vertices[b],
            style.edge_color(cp.assignments[ei]),
            style.stroke_width,
        )
    return doc


def render_folded(
    cp: CreasePattern,
    folded: FoldedState,
    side: str = "front",
    style: RenderStyle = DEFAULT_STYLE,
) -> VectorDoc:
    """Folded view: faces painted bottom-to-top in layer order.

    The back view is the front view mirrored horizontally with the stacking
    reversed; which face color shows depends on the face's facing flag.
    """
    if side not in ("front", "back"):
        raise ValueError(f"side must be 'front' or 'back', got {side!r}")
    if folded.layer_order is None or len(folded.layer_order) != cp.face_count:
        raise MissingLayerOrder("folded state has no complete layer order")
    doc = VectorDoc(background=style.background)
    order = list(folded.layer_order)
    if side == "back":
        order.reverse()
        doc.mirrored = True
    for fi in order:
        t = folded.transforms[fi]
        pts = [t.apply(cp.vertices[v]) for v in cp.faces[fi]]
        up = folded.orientations[fi] > 0
        if side == "front":
            fill = style.front_face_color if up else style.back_face_color
        else:
            fill = style.back_face_color if up else style.front_face_color
        doc.add_polygon(pts, fill)
        if style.draw_folded_creases:
            for k in range(len(pts)):
                doc.add_stroke(
                    pts[k], pts[(k + 1) % len(pts)], style.boundary_color, 1.0
                )
    return doc
