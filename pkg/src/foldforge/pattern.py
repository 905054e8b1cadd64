"""Crease pattern kernel: a planar arrangement on the paper square.

Inserting a crease snaps its endpoints, splits it at every crossing with
existing edges, splits the crossed edges (which keep their assignment), and
re-extracts the face set from scratch. Patterns are treated as immutable from
the outside: ``insert_crease`` returns a new pattern and never mutates its
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .foldfile import (
    ASSIGNMENTS,
    BOUNDARY,
    FOLD_ASSIGNMENTS,
    FoldFile,
)
from .geometry import (
    EPSILON,
    Point,
    close,
    dist,
    point_segment_distance,
    polygon_area,
    project_parameter,
    segment_intersection,
)


class PatternError(Exception):
    """Base class for crease insertion problems."""


class DegenerateSegment(PatternError):
    pass


class OutOfBounds(PatternError):
    pass


class CollinearOverlap(PatternError):
    pass


class DuplicateCrease(PatternError):
    pass


class UnknownVertex(PatternError):
    pass


@dataclass(frozen=True)
class Segment:
    """A crease request in paper units."""

    p1: Point
    p2: Point

    def length(self) -> float:
        return dist(self.p1, self.p2)


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned paper square."""

    min_x: float = 0.0
    min_y: float = 0.0
    max_x: float = 10.0
    max_y: float = 10.0

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p: Point, tol: float = EPSILON) -> bool:
        return (
            self.min_x - tol <= p[0] <= self.max_x + tol
            and self.min_y - tol <= p[1] <= self.max_y + tol
        )

    def clamp(self, p: Point) -> Point:
        return (
            min(self.max_x, max(self.min_x, p[0])),
            min(self.max_y, max(self.min_y, p[1])),
        )

    def on_border(self, p: Point, tol: float = EPSILON) -> bool:
        return (
            abs(p[0] - self.min_x) <= tol
            or abs(p[0] - self.max_x) <= tol
            or abs(p[1] - self.min_y) <= tol
            or abs(p[1] - self.max_y) <= tol
        )


PAPER_BOUNDS = Bounds()


@dataclass
class StarEntry:
    edge: int
    direction: float  # CCW angle of the edge leaving the vertex
    assignment: str
    other_vertex: int


@dataclass
class VertexStar:
    """Edges around a vertex in CCW order plus the sector angles between
    consecutive edges. Boundary stars omit the exterior sector, so they carry
    one fewer sector than edges."""

    vertex: int
    interior: bool
    entries: list[StarEntry]
    sectors: list[float]

    def pairs(self) -> list[tuple[int, float]]:
        return [(e.edge, s) for e, s in zip(self.entries, self.sectors)]


class CreasePattern:
    """Planar straight-line arrangement on the paper square."""

    def __init__(
        self,
        vertices: list[Point],
        edges: list[tuple[int, int]],
        assignments: list[str],
        bounds: Bounds = PAPER_BOUNDS,
        epsilon: float = EPSILON,
    ):
        self.vertices = list(vertices)
        self.edges = list(edges)
        self.assignments = list(assignments)
        self.bounds = bounds
        self.epsilon = epsilon
        self.faces: list[tuple[int, ...]] = []
        self._extract_faces()

    # -- construction ---------------------------------------------------

    @classmethod
    def new_blank(cls, bounds: Bounds = PAPER_BOUNDS) -> "CreasePattern":
        vs = [
            (bounds.min_x, bounds.min_y),
            (bounds.max_x, bounds.min_y),
            (bounds.max_x, bounds.max_y),
            (bounds.min_x, bounds.max_y),
        ]
        es = [(0, 1), (1, 2), (2, 3), (3, 0)]
        return cls(vs, es, [BOUNDARY] * 4, bounds=bounds)

    @classmethod
    def from_fold_file(
        cls, f: FoldFile, bounds: Bounds = PAPER_BOUNDS, validate: bool = True
    ) -> "CreasePattern":
        cp = cls(
            list(f.vertices_coords),
            list(f.edges_vertices),
            list(f.edges_assignment),
            bounds=bounds,
        )
        if validate:
            cp.ensure_planar()
        return cp

    def ensure_planar(self) -> None:
        """Reject edge sets whose segments meet anywhere but shared endpoints."""
        eps = self.epsilon
        for i in range(len(self.edges)):
            a1, a2 = (self.vertices[v] for v in self.edges[i])
            for j in range(i + 1, len(self.edges)):
                b1, b2 = (self.vertices[v] for v in self.edges[j])
                kind, pts = segment_intersection(a1, a2, b1, b2, eps)
                if kind == "none":
                    continue
                if kind == "overlap":
                    raise PatternError(f"edges {i} and {j} overlap: not a planar arrangement")
                p = pts[0]
                shared = any(
                    close(p, q, eps) for q in (a1, a2)
                ) and any(close(p, q, eps) for q in (b1, b2))
                if not shared:
                    raise PatternError(
                        f"edges {i} and {j} cross away from their endpoints"
                    )

    def to_fold_file(self, extra_fields: dict | None = None) -> FoldFile:
        return FoldFile(
            vertices_coords=tuple(self.vertices),
            edges_vertices=tuple(self.edges),
            edges_assignment=tuple(self.assignments),
            faces_vertices=tuple(self.faces),
            extra_fields=dict(extra_fields or {}),
        )

    def copy(self) -> "CreasePattern":
        return CreasePattern(
            self.vertices, self.edges, self.assignments, self.bounds, self.epsilon
        )

    # -- queries ---------------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def crease_count(self) -> int:
        return sum(1 for a in self.assignments if a != BOUNDARY)

    def face_points(self, face_index: int) -> list[Point]:
        return [self.vertices[v] for v in self.faces[face_index]]

    def is_boundary_vertex(self, v: int) -> bool:
        return self.bounds.on_border(self.vertices[v], self.epsilon)

    def find_vertex(self, p: Point, tol: float | None = None) -> int | None:
        tol = self.epsilon if tol is None else tol
        best = None
        best_d = tol
        for i, q in enumerate(self.vertices):
            d = dist(p, q)
            if d <= best_d:
                best, best_d = i, d
        return best

    def area_sum(self) -> float:
        return sum(abs(polygon_area(self.face_points(i))) for i in range(len(self.faces)))

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        seen = {0}
        stack = [0]
        adj: dict[int, list[int]] = {i: [] for i in range(len(self.vertices))}
        for (a, b) in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def structurally_equal(self, other: "CreasePattern") -> bool:
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.assignments == other.assignments
            and self.faces == other.faces
        )

    # -- vertex stars ----------------------------------------------------

    def vertex_star(self, v: int) -> VertexStar:
        if not (0 <= v < len(self.vertices)):
            raise UnknownVertex(f"vertex {v} does not exist")
        origin = self.vertices[v]
        entries: list[StarEntry] = []
        for ei, (a, b) in enumerate(self.edges):
            if a == v or b == v:
                other = b if a == v else a
                q = self.vertices[other]
                ang = math.atan2(q[1] - origin[1], q[0] - origin[0]) % (2 * math.pi)
                entries.append(StarEntry(ei, ang, self.assignments[ei], other))
        entries.sort(key=lambda e: (e.direction, e.edge))
        interior = not self.is_boundary_vertex(v)
        n = len(entries)
        raw_sectors = []
        for i in range(n):
            nxt = entries[(i + 1) % n]
            gap = (nxt.direction - entries[i].direction) % (2 * math.pi)
            if n == 1:
                gap = 2 * math.pi
            raw_sectors.append(gap)
        if interior:
            return VertexStar(v, True, entries, raw_sectors)
        # Drop the sector that spans the paper exterior and rotate the star
        # so it starts just after the gap.
        ext = self._exterior_sector_index(origin, entries, raw_sectors)
        order = [(ext + 1 + k) % n for k in range(n)]
        rot = [entries[i] for i in order]
        sectors = [raw_sectors[i] for i in order[:-1]]
        return VertexStar(v, False, rot, sectors)

    def _exterior_sector_index(
        self, origin: Point, entries: list[StarEntry], sectors: list[float]
    ) -> int:
        b = self.bounds
        tol = self.epsilon
        for i, gap in enumerate(sectors):
            mid = (entries[i].direction + gap / 2.0) % (2 * math.pi)
            dx, dy = math.cos(mid), math.sin(mid)
            outward = (
                (abs(origin[0] - b.min_x) <= tol and dx < 0)
                or (abs(origin[0] - b.max_x) <= tol and dx > 0)
                or (abs(origin[1] - b.min_y) <= tol and dy < 0)
                or (abs(origin[1] - b.max_y) <= tol and dy > 0)
            )
            if outward:
                return i
        # Fallback: widest gap (defensive; should not happen on valid data).
        return max(range(len(sectors)), key=lambda i: sectors[i])

    # -- crease insertion --------------------------------------------------

    def insert_crease(self, seg: Segment, assignment: str) -> "CreasePattern":
        if assignment not in FOLD_ASSIGNMENTS:
            raise ValueError(f"agent creases must be M or V, got {assignment!r}")
        eps = self.epsilon
        if seg.length() <= eps:
            raise DegenerateSegment(f"segment of length {seg.length():g}")
        for p in (seg.p1, seg.p2):
            if not self.bounds.contains(p, eps):
                raise OutOfBounds(f"point {p} outside paper bounds")

        p1 = self._snap_point(self.bounds.clamp(seg.p1))
        p2 = self._snap_point(self.bounds.clamp(seg.p2))
        if dist(p1, p2) <= eps:
            raise DegenerateSegment("segment endpoints snap together")

        self._check_overlap(p1, p2, assignment)

        return self._insert_split(p1, p2, assignment)

    def _snap_point(self, p: Point) -> Point:
        """Snap to the nearest existing vertex, else onto the nearest edge."""
        vi = self.find_vertex(p)
        if vi is not None:
            return self.vertices[vi]
        best: Point | None = None
        best_d = self.epsilon
        for (a, b) in self.edges:
            pa, pb = self.vertices[a], self.vertices[b]
            d = point_segment_distance(p, pa, pb)
            if d <= best_d:
                t = min(1.0, max(0.0, project_parameter(p, pa, pb)))
                best = (
                    pa[0] + (pb[0] - pa[0]) * t,
                    pa[1] + (pb[1] - pa[1]) * t,
                )
                best_d = d
        return best if best is not None else p

    def _check_overlap(self, p1: Point, p2: Point, assignment: str) -> None:
        """Reject positive-length overlap with existing edges.

        A segment whose full extent retraces existing edges of the same
        assignment is reported as a duplicate; any other overlap is collinear.
        """
        eps = self.epsilon
        seg_len = dist(p1, p2)
        intervals: list[tuple[float, float, int]] = []
        for ei, (a, b) in enumerate(self.edges):
            kind, pts = segment_intersection(p1, p2, self.vertices[a], self.vertices[b], eps)
            if kind == "overlap":
                t1 = project_parameter(pts[0], p1, p2)
                t2 = project_parameter(pts[1], p1, p2)
                lo, hi = min(t1, t2), max(t1, t2)
                if (hi - lo) * seg_len > eps:
                    intervals.append((lo, hi, ei))
        if not intervals:
            return
        same = all(self.assignments[ei] == assignment for _, _, ei in intervals)
        intervals.sort()
        covered = 0.0
        reach = 0.0
        for lo, hi, _ in intervals:
            lo = max(lo, reach)
            if hi > lo:
                covered += hi - lo
                reach = hi
        full = covered * seg_len >= seg_len - eps
        endpoints_exist = (
            self.find_vertex(p1) is not None and self.find_vertex(p2) is not None
        )
        if full and same and endpoints_exist:
            raise DuplicateCrease(f"crease {p1}-{p2} already present")
        raise CollinearOverlap(f"segment {p1}-{p2} overlaps an existing edge")

    def _insert_split(self, p1: Point, p2: Point, assignment: str) -> "CreasePattern":
        eps = self.epsilon
        seg_len = dist(p1, p2)
        verts = list(self.vertices)
        edges = list(self.edges)
        assigns = list(self.assignments)

        def vertex_near(p: Point) -> int | None:
            for i, q in enumerate(verts):
                if dist(p, q) <= eps:
                    return i
            return None

        # Collect crossing events: (t along new segment, point, crossed edge).
        events: list[tuple[float, Point, int]] = []
        for ei, (a, b) in enumerate(edges):
            kind, pts = segment_intersection(p1, p2, verts[a], verts[b], eps)
            if kind == "point":
                t = project_parameter(pts[0], p1, p2)
                t = min(1.0, max(0.0, t))
                events.append((t, pts[0], ei))

        # Assemble the set of split positions along the new segment; snap to
        # existing vertices, then create the remaining new vertices in
        # canonical (x, y) order.
        stops: dict[int, float] = {}
        new_points: list[tuple[Point, list[int]]] = []  # point, crossed edges
        edge_splits: dict[int, list[int]] = {}

        for endpoint, t_end in ((p1, 0.0), (p2, 1.0)):
            vi = vertex_near(endpoint)
            if vi is None:
                new_points.append((endpoint, []))
            else:
                stops.setdefault(vi, t_end)

        for t, pt, ei in events:
            vi = vertex_near(pt)
            if vi is not None:
                stops.setdefault(vi, t)
                continue
            for k, (q, crossed) in enumerate(new_points):
                if dist(pt, q) <= eps:
                    crossed.append(ei)
                    break
            else:
                new_points.append((pt, [ei]))

        new_points.sort(key=lambda item: (item[0][0], item[0][1]))
        for pt, crossed in new_points:
            vi = len(verts)
            verts.append(pt)
            t = project_parameter(pt, p1, p2)
            stops.setdefault(vi, min(1.0, max(0.0, t)))
            for ei in crossed:
                edge_splits.setdefault(ei, []).append(vi)

        # Split crossed edges; each half keeps the original assignment.
        for ei in sorted(edge_splits):
            a, b = edges[ei]
            pa = verts[a]
            mids = sorted(
                edge_splits[ei], key=lambda vi: project_parameter(verts[vi], pa, verts[b])
            )
            chain = [a] + mids + [b]
            edges[ei] = (chain[0], chain[1])
            for u, w in zip(chain[1:], chain[2:]):
                edges.append((u, w))
                assigns.append(assigns[ei])

        # Add the pieces of the new crease between consecutive stops.
        ordered = sorted(stops.items(), key=lambda kv: kv[1])
        for (va, ta), (vb, tb) in zip(ordered, ordered[1:]):
            if (tb - ta) * seg_len <= eps:
                continue
            edges.append((va, vb))
            assigns.append(assignment)

        return CreasePattern(verts, edges, assigns, self.bounds, self.epsilon)

    # -- faces -------------------------------------------------------------

    def _extract_faces(self) -> None:
        """Re-extract interior faces from the rotation system.

        Interior faces come out counter-clockwise; each component's clockwise
        outer walk (non-positive area) is dropped. Cycles are rotated to start
        at their smallest vertex for stable output.
        """
        outgoing: dict[int, list[tuple[float, int, int]]] = {
            v: [] for v in range(len(self.vertices))
        }
        for ei, (a, b) in enumerate(self.edges):
            pa, pb = self.vertices[a], self.vertices[b]
            ang_ab = math.atan2(pb[1] - pa[1], pb[0] - pa[0]) % (2 * math.pi)
            ang_ba = (ang_ab + math.pi) % (2 * math.pi)
            outgoing[a].append((ang_ab, b, ei))
            outgoing[b].append((ang_ba, a, ei))
        for v in outgoing:
            outgoing[v].sort()
        position = {
            (v, ei): k for v, lst in outgoing.items() for k, (_, _, ei) in enumerate(lst)
        }

        faces: list[tuple[int, ...]] = []
        visited: set[tuple[int, int, int]] = set()  # (from, to, edge)
        for ei, (a, b) in enumerate(self.edges):
            for u, v in ((a, b), (b, a)):
                if (u, v, ei) in visited:
                    continue
                cycle: list[int] = []
                cu, cv, ce = u, v, ei
                while (cu, cv, ce) not in visited:
                    visited.add((cu, cv, ce))
                    cycle.append(cu)
                    lst = outgoing[cv]
                    k = position[(cv, ce)]
                    nk = (k - 1) % len(lst)
                    _, nv, ne = lst[nk]
                    cu, cv, ce = cv, nv, ne
                pts = [self.vertices[w] for w in cycle]
                if polygon_area(pts) > 1e-12:
                    m = cycle.index(min(cycle))
                    faces.append(tuple(cycle[m:] + cycle[:m]))
        faces.sort(key=lambda c: c)
        self.faces = faces

    # -- invariants ----------------------------------------------------------

    def check_invariants(self, tol: float = 1e-6) -> None:
        """Raise AssertionError when the arrangement is inconsistent.

        Tiling and Euler checks apply to boundary-connected arrangements;
        floating crease islands (which never pass local foldability checks,
        so they never commit) may enclose area the simple face cycles cannot
        account for.
        """
        for a in self.assignments:
            assert a in ASSIGNMENTS
        for ei, (a, b) in enumerate(self.edges):
            if self.assignments[ei] == BOUNDARY:
                assert self.bounds.on_border(self.vertices[a], self.epsilon)
                assert self.bounds.on_border(self.vertices[b], self.epsilon)
        if self.is_connected():
            total = self.area_sum()
            assert abs(total - self.bounds.area) <= tol, (
                f"face areas sum to {total}, expected {self.bounds.area}"
            )
            v, e, f = len(self.vertices), len(self.edges), len(self.faces) + 1
            assert v - e + f == 2, f"Euler check failed: V={v} E={e} F={f}"
