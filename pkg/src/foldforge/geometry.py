"""Planar geometry primitives shared by the pattern kernel and the solver.

Everything works on plain (x, y) float tuples in paper units. Tolerances are
explicit arguments so callers can pick the snapping epsilon (pattern editing)
or the tighter solver tolerance.
"""

from __future__ import annotations

import math

Point = tuple[float, float]

# Snapping tolerance for agent-emitted coordinates (paper units).
EPSILON = 1e-6
# Tolerance used for folded-state geometry predicates.
SOLVER_TOL = 1e-9


def dist(a: Point, b: Point) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def close(a: Point, b: Point, tol: float = EPSILON) -> bool:
    return abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol


def cross(o: Point, a: Point, b: Point) -> float:
    """Z component of (a - o) x (b - o)."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def lerp(a: Point, b: Point, t: float) -> Point:
    return (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return dist(p, a)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = min(1.0, max(0.0, t))
    return dist(p, (ax + dx * t, ay + dy * t))


def project_parameter(p: Point, a: Point, b: Point) -> float:
    """Parameter t of the orthogonal projection of p onto line a->b."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return 0.0
    return ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / denom


def segment_intersection(
    a1: Point, a2: Point, b1: Point, b2: Point, tol: float = EPSILON
) -> tuple[str, list[Point]]:
    """Classify the intersection of segments a and b.

    Returns one of:
      ("none", [])
      ("point", [p])        -- single intersection point (crossing or touch)
      ("overlap", [p, q])   -- collinear overlap of positive length, endpoints p, q
    """
    ax, ay = a1
    dx_a, dy_a = a2[0] - ax, a2[1] - ay
    bx, by = b1
    dx_b, dy_b = b2[0] - bx, b2[1] - by
    denom = dx_a * dy_b - dy_a * dx_b

    len_a = math.hypot(dx_a, dy_a)
    len_b = math.hypot(dx_b, dy_b)
    # Degenerate inputs are the caller's problem; treat as no intersection.
    if len_a == 0.0 or len_b == 0.0:
        return ("none", [])

    # Parallel (or nearly so): check for collinear overlap.
    if abs(denom) <= tol * len_a * len_b:
        # Distance of b1 from line a.
        if abs(cross(a1, a2, b1)) > tol * len_a:
            return ("none", [])
        # Collinear: project b's endpoints on a's parameter space.
        t1 = project_parameter(b1, a1, a2)
        t2 = project_parameter(b2, a1, a2)
        lo, hi = min(t1, t2), max(t1, t2)
        lo = max(lo, 0.0)
        hi = min(hi, 1.0)
        if hi - lo <= tol / len_a:
            if hi - lo >= -tol / len_a:
                p = lerp(a1, a2, (lo + hi) / 2.0)
                return ("point", [p])
            return ("none", [])
        return ("overlap", [lerp(a1, a2, lo), lerp(a1, a2, hi)])

    t = ((bx - ax) * dy_b - (by - ay) * dx_b) / denom
    u = ((bx - ax) * dy_a - (by - ay) * dx_a) / denom
    pad_t = tol / len_a
    pad_u = tol / len_b
    if -pad_t <= t <= 1.0 + pad_t and -pad_u <= u <= 1.0 + pad_u:
        return ("point", [lerp(a1, a2, min(1.0, max(0.0, t)))])
    return ("none", [])


def polygon_area(points: list[Point]) -> float:
    """Signed area (positive for counter-clockwise cycles)."""
    area = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area / 2.0


def polygon_centroid(points: list[Point]) -> Point:
    a = polygon_area(points)
    if abs(a) < 1e-12:
        xs = sum(p[0] for p in points) / len(points)
        ys = sum(p[1] for p in points) / len(points)
        return (xs, ys)
    cx = cy = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        w = x1 * y2 - x2 * y1
        cx += (x1 + x2) * w
        cy += (y1 + y2) * w
    return (cx / (6.0 * a), cy / (6.0 * a))


def point_in_polygon(p: Point, points: list[Point], tol: float = 1e-12) -> bool:
    """Boundary-inclusive point-in-polygon (winding-agnostic, ray cast)."""
    x, y = p
    n = len(points)
    for i in range(n):
        if point_segment_distance(p, points[i], points[(i + 1) % n]) <= tol:
            return True
    inside = False
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x < xin:
                inside = not inside
    return inside


class Isometry:
    """Planar isometry stored as a 2x2 linear part plus translation.

    Composition of reflections only, so the linear part is orthogonal and
    ``det`` is +1 (even number of reflections) or -1 (odd).
    """

    __slots__ = ("a", "b", "c", "d", "tx", "ty")

    def __init__(self, a=1.0, b=0.0, c=0.0, d=1.0, tx=0.0, ty=0.0):
        self.a, self.b, self.c, self.d = a, b, c, d
        self.tx, self.ty = tx, ty

    @classmethod
    def identity(cls) -> "Isometry":
        return cls()

    @classmethod
    def reflection(cls, p1: Point, p2: Point) -> "Isometry":
        """Reflection across the line through p1 and p2."""
        dx, dy = p2[0] - p1[0], p2[1] - p1[1]
        norm = math.hypot(dx, dy)
        ux, uy = dx / norm, dy / norm
        a = ux * ux - uy * uy
        b = 2.0 * ux * uy
        # Linear part [[a, b], [b, -a]]; fixes p1.
        x0, y0 = p1
        tx = x0 - (a * x0 + b * y0)
        ty = y0 - (b * x0 - a * y0)
        return cls(a, b, b, -a, tx, ty)

    def apply(self, p: Point) -> Point:
        x, y = p
        return (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)

    def compose(self, other: "Isometry") -> "Isometry":
        """Compose: apply ``other`` first, then self."""
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        tx = self.a * other.tx + self.b * other.ty + self.tx
        ty = self.c * other.tx + self.d * other.ty + self.ty
        return Isometry(a, b, c, d, tx, ty)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.tx, self.ty)

    def __repr__(self) -> str:
        return "Isometry(%r)" % (self.as_tuple(),)
