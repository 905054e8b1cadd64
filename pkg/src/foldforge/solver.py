"""Flat-foldability: local vertex checks, folded geometry, layer ordering.

Validation runs in two stages. Local checks test Maekawa / Kawasaki at every
interior vertex. The global stage reflects faces into the folded plane and
searches for a stacking of overlapping faces that respects crease direction,
excludes paper crossings (taco-taco / taco-tortilla style), and admits a
consistent global order. The search is budgeted; exhausting the budget yields
``Status.UNKNOWN`` which callers must treat as not-valid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

from shapely.geometry import LineString, Point as ShapelyPoint, Polygon
from shapely.strtree import STRtree

from .foldfile import BOUNDARY, FLAT, MOUNTAIN, VALLEY
from .geometry import Isometry, Point
from .pattern import CreasePattern, VertexStar

KAWASAKI_TOL = 1e-9
OVERLAP_AREA_TOL = 1e-9
PROBE_DELTA = 1e-7


class SolverError(Exception):
    pass


class BoundaryVertex(SolverError):
    """Maekawa/Kawasaki do not apply at paper-boundary vertices."""


class OddDegree(SolverError):
    """Kawasaki needs an even number of folded creases."""


class DisconnectedFaces(SolverError):
    pass


@dataclass(frozen=True)
class SolverBudget:
    max_nodes: int = 200_000
    max_seconds: float = 5.0


DEFAULT_BUDGET = SolverBudget()


class Status(str, Enum):
    VALID = "valid"
    LOCALLY_INVALID = "locally_invalid"
    GLOBALLY_INVALID = "globally_invalid"
    UNKNOWN = "unknown"


@dataclass
class FoldedGeometry:
    """Per-face isometries into the folded plane plus facing flags."""

    transforms: list[Isometry]
    orientations: list[int]  # +1 front side up, -1 front side down

    def folded_points(self, cp: CreasePattern, face_index: int) -> list[Point]:
        t = self.transforms[face_index]
        return [t.apply(cp.vertices[v]) for v in cp.faces[face_index]]


@dataclass
class FoldedState:
    """A witness folded state: geometry plus one consistent stacking."""

    transforms: list[Isometry]
    orientations: list[int]
    layer_order: list[int]  # face indices, bottom to top
    above: dict[tuple[int, int], bool] = field(default_factory=dict)
    # ``above[(i, j)] is True`` when face i stacks above face j (only for
    # pairs whose folded polygons overlap with positive area).


@dataclass
class FoldabilityVerdict:
    status: Status
    witness: FoldedState | None = None
    violations: list[tuple[object, str]] = field(default_factory=list)
    nodes_used: int = 0

    @property
    def valid(self) -> bool:
        return self.status is Status.VALID


# -- local checks -----------------------------------------------------------


def folded_star(star: VertexStar) -> tuple[list[str], list[float]]:
    """Drop flat (F) edges from an interior star, merging their sectors."""
    assigns = [e.assignment for e in star.entries]
    sectors = list(star.sectors)
    while FLAT in assigns:
        if len(assigns) == 1:
            return [], []
        k = assigns.index(FLAT)
        n = len(assigns)
        merged = sectors[(k - 1) % n] + sectors[k]
        assigns.pop(k)
        sectors.pop(k)
        sectors[(k - 1) % len(sectors)] = merged
    return assigns, sectors


def maekawa_ok(assignments: list[str]) -> bool:
    """Mountain/valley counts must differ by exactly two (no creases: flat)."""
    m = sum(1 for a in assignments if a == MOUNTAIN)
    v = sum(1 for a in assignments if a == VALLEY)
    if m + v == 0:
        return True
    return abs(m - v) == 2


def kawasaki_ok(sectors: list[float], tol: float = KAWASAKI_TOL) -> bool:
    """Alternating sector sums must each equal pi."""
    if not sectors:
        return True
    odd = sum(sectors[1::2])
    even = sum(sectors[0::2])
    return abs(odd - math.pi) <= tol and abs(even - math.pi) <= tol


def check_maekawa(star: VertexStar) -> bool:
    if not star.interior:
        raise BoundaryVertex(f"vertex {star.vertex} lies on the paper boundary")
    assigns, _ = folded_star(star)
    return maekawa_ok(assigns)


def check_kawasaki(star: VertexStar) -> bool:
    if not star.interior:
        raise BoundaryVertex(f"vertex {star.vertex} lies on the paper boundary")
    assigns, sectors = folded_star(star)
    if not assigns:
        return True
    if len(assigns) % 2 != 0:
        raise OddDegree(f"vertex {star.vertex} has odd folded degree {len(assigns)}")
    return kawasaki_ok(sectors)


def local_violations(cp: CreasePattern) -> list[tuple[int, str]]:
    """All Maekawa/Kawasaki failures at interior vertices."""
    out: list[tuple[int, str]] = []
    for v in range(cp.vertex_count):
        if cp.is_boundary_vertex(v):
            continue
        star = cp.vertex_star(v)
        assigns, sectors = folded_star(star)
        if not maekawa_ok(assigns):
            out.append((v, "maekawa"))
        if assigns and len(assigns) % 2 == 0 and not kawasaki_ok(sectors):
            out.append((v, "kawasaki"))
        elif assigns and len(assigns) % 2 != 0:
            # Odd folded degree already fails Maekawa; Kawasaki undefined.
            pass
    return out


# -- folded geometry ----------------------------------------------------------


def _edge_faces(cp: CreasePattern) -> dict[int, list[int]]:
    directed: dict[tuple[int, int], int] = {}
    for fi, cycle in enumerate(cp.faces):
        n = len(cycle)
        for k in range(n):
            directed[(cycle[k], cycle[(k + 1) % n])] = fi
    out: dict[int, list[int]] = {}
    for ei, (a, b) in enumerate(cp.edges):
        faces = []
        if (a, b) in directed:
            faces.append(directed[(a, b)])
        if (b, a) in directed:
            faces.append(directed[(b, a)])
        out[ei] = faces
    return out


def _root_face(cp: CreasePattern) -> int:
    from .geometry import point_in_polygon

    probe = (cp.bounds.min_x + cp.epsilon, cp.bounds.min_y + cp.epsilon)
    for fi in range(cp.face_count):
        if point_in_polygon(probe, cp.face_points(fi), tol=1e-9):
            return fi
    return 0


def compute_folded_geometry(cp: CreasePattern) -> FoldedGeometry:
    """Reflect each face across the crease path from the root face.

    The root face (containing the bottom-left probe point) keeps the
    identity; crossing an M/V crease composes a reflection across it; flat
    (F) edges join faces without reflecting.
    """
    if cp.face_count == 0:
        raise DisconnectedFaces("pattern has no faces")
    edge_faces = _edge_faces(cp)
    neighbors: dict[int, list[tuple[int, int]]] = {f: [] for f in range(cp.face_count)}
    for ei, faces in edge_faces.items():
        if len(faces) == 2 and cp.assignments[ei] != BOUNDARY:
            f, g = faces
            neighbors[f].append((ei, g))
            neighbors[g].append((ei, f))
    for f in neighbors:
        neighbors[f].sort()

    root = _root_face(cp)
    transforms: list[Isometry | None] = [None] * cp.face_count
    orientations = [0] * cp.face_count
    transforms[root] = Isometry.identity()
    orientations[root] = 1
    queue = [root]
    while queue:
        f = queue.pop(0)
        for ei, g in neighbors[f]:
            if transforms[g] is not None:
                continue
            a, b = cp.edges[ei]
            if cp.assignments[ei] in (MOUNTAIN, VALLEY):
                refl = Isometry.reflection(cp.vertices[a], cp.vertices[b])
                transforms[g] = transforms[f].compose(refl)
                orientations[g] = -orientations[f]
            else:
                transforms[g] = transforms[f]
                orientations[g] = orientations[f]
            queue.append(g)
    if any(t is None for t in transforms):
        raise DisconnectedFaces("face-adjacency graph is not connected")
    return FoldedGeometry(transforms=transforms, orientations=orientations)


# -- layer ordering -----------------------------------------------------------


@dataclass
class _Super:
    """Faces joined by flat edges act as one rigid sheet."""

    index: int
    members: list[int]
    polygon: Polygon
    orientation: int


class _BudgetExceeded(Exception):
    pass


class _Ticker:
    def __init__(self, budget: SolverBudget):
        self.nodes = 0
        self.max_nodes = budget.max_nodes
        self.deadline = time.monotonic() + budget.max_seconds

    def tick(self, n: int = 1) -> None:
        self.nodes += n
        if self.nodes > self.max_nodes:
            raise _BudgetExceeded()
        if self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise _BudgetExceeded()

    def check_time(self) -> None:
        if time.monotonic() > self.deadline:
            raise _BudgetExceeded()


def _build_supers(cp: CreasePattern, geometry: FoldedGeometry) -> tuple[list[_Super], list[int]]:
    parent = list(range(cp.face_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edge_faces = _edge_faces(cp)
    for ei, faces in edge_faces.items():
        if len(faces) == 2 and cp.assignments[ei] == FLAT:
            a, b = (find(f) for f in faces)
            if a != b:
                parent[max(a, b)] = min(a, b)

    groups: dict[int, list[int]] = {}
    for f in range(cp.face_count):
        groups.setdefault(find(f), []).append(f)
    supers: list[_Super] = []
    face_super = [0] * cp.face_count
    for si, root in enumerate(sorted(groups)):
        members = sorted(groups[root])
        poly = None
        for f in members:
            p = Polygon(geometry.folded_points(cp, f))
            if not p.is_valid:
                p = p.buffer(0)
            poly = p if poly is None else poly.union(p)
        supers.append(
            _Super(si, members, poly, geometry.orientations[members[0]])
        )
        for f in members:
            face_super[f] = si
    return supers, face_super


def _hinges(
    cp: CreasePattern, geometry: FoldedGeometry, face_super: list[int]
) -> list[tuple[int, int, str, Point, Point]]:
    """(super_a, super_b, assignment, folded segment endpoints) per M/V edge."""
    edge_faces = _edge_faces(cp)
    out = []
    for ei, faces in edge_faces.items():
        if cp.assignments[ei] not in (MOUNTAIN, VALLEY) or len(faces) != 2:
            continue
        f, g = faces
        t = geometry.transforms[f]
        a, b = cp.edges[ei]
        q1 = t.apply(cp.vertices[a])
        q2 = t.apply(cp.vertices[b])
        out.append((face_super[f], face_super[g], cp.assignments[ei], q1, q2))
    return out


def _segment_pieces(line: LineString, poly: Polygon, min_len: float = 1e-7):
    inter = line.intersection(poly)
    if inter.is_empty:
        return []
    geoms = getattr(inter, "geoms", [inter])
    return [g for g in geoms if isinstance(g, LineString) and g.length > min_len]


def _covers_both_sides(poly: Polygon, m: Point, normal: Point) -> bool:
    nx, ny = normal
    p_up = ShapelyPoint(m[0] + nx * PROBE_DELTA, m[1] + ny * PROBE_DELTA)
    p_dn = ShapelyPoint(m[0] - nx * PROBE_DELTA, m[1] - ny * PROBE_DELTA)
    return poly.contains(p_up) and poly.contains(p_dn)


def _taco_side(poly_a: Polygon, poly_b: Polygon, m: Point, normal: Point) -> int:
    """Which side of the crease line a hinge's two faces cover: +1, -1, 0."""
    for sign in (1, -1):
        px = m[0] + sign * normal[0] * PROBE_DELTA
        py = m[1] + sign * normal[1] * PROBE_DELTA
        p = ShapelyPoint(px, py)
        if poly_a.contains(p) and poly_b.contains(p):
            return sign
    return 0


def solve_layer_order(
    cp: CreasePattern,
    geometry: FoldedGeometry,
    budget: SolverBudget = DEFAULT_BUDGET,
) -> FoldabilityVerdict:
    """Search for a stacking of overlapping faces.

    Constraints: (i) the crease assignment fixes the relative order of the
    two faces it joins; (ii) a sheet covering an interior point of a folded
    crease on both sides may not sit between the faces the crease joins, and
    coincident same-side creases must nest rather than interleave; (iii) the
    resulting relation must extend to a global stacking (acyclic).
    """
    ticker = _Ticker(budget)
    try:
        return _solve_layers_inner(cp, geometry, ticker)
    except _BudgetExceeded:
        return FoldabilityVerdict(
            status=Status.UNKNOWN,
            violations=[(None, "budget-exhausted")],
            nodes_used=ticker.nodes,
        )


def _solve_layers_inner(
    cp: CreasePattern, geometry: FoldedGeometry, ticker: _Ticker
) -> FoldabilityVerdict:
    supers, face_super = _build_supers(cp, geometry)
    hinges = _hinges(cp, geometry, face_super)
    ns = len(supers)

    # Overlapping pairs define the order variables.
    polys = [s.polygon for s in supers]
    tree = STRtree(polys)
    pairs: list[tuple[int, int]] = []
    for i in range(ns):
        ticker.check_time()
        for j in sorted(int(j) for j in tree.query(polys[i])):
            if j <= i:
                continue
            inter = polys[i].intersection(polys[j])
            if inter.area > OVERLAP_AREA_TOL:
                pairs.append((i, j))
    pair_set = set(pairs)
    # Faces joined by a folded crease always stack; keep their pair a
    # variable even when the clipped overlap area is degenerate.
    for (sa, sb, _assign, _q1, _q2) in hinges:
        if sa != sb:
            pair_set.add((min(sa, sb), max(sa, sb)))

    def key_of(i: int, j: int) -> tuple[tuple[int, int], bool]:
        """Variable key plus a flag: value means 'i above j' XOR flag."""
        return ((i, j), False) if i < j else ((j, i), True)

    # Parity constraints: XOR of listed variables (after per-var negation)
    # equals the target bit. C1 hinge rules are unary, C2 equalities binary,
    # C3 nesting quaternary.
    constraints: list[tuple[list[tuple[tuple[int, int], bool]], bool, str]] = []
    violations: list[tuple[object, str]] = []

    def add_constraint(
        terms: list[tuple[int, int]], target: bool, tag: str
    ) -> bool:
        # Constraint semantics: XOR over terms of above(i, j) == target,
        # with above(i, j) read from the canonical variable via the neg flag.
        vars_flags = []
        for (i, j) in terms:
            if (min(i, j), max(i, j)) not in pair_set:
                return False  # face pair never overlaps; constraint is moot
            vars_flags.append(key_of(i, j))
        constraints.append((vars_flags, target, tag))
        return True

    # C1: crease assignment fixes hinge order. The face folded face-down
    # (orientation -1) lies above for a valley, below for a mountain.
    for (sa, sb, assign, q1, q2) in hinges:
        if sa == sb or supers[sa].orientation == supers[sb].orientation:
            violations.append(((sa, sb), "hinge-within-sheet"))
            return FoldabilityVerdict(
                Status.GLOBALLY_INVALID, violations=violations, nodes_used=ticker.nodes
            )
        down = sa if supers[sa].orientation < 0 else sb
        up = sb if down == sa else sa
        above = down if assign == VALLEY else up
        below = up if above == down else down
        add_constraint([(above, below)], True, "crease")

    # C2: sheets crossing a folded crease stay clear of its taco.
    hinge_lines = []
    for (sa, sb, assign, q1, q2) in hinges:
        ticker.check_time()
        line = LineString([q1, q2])
        dx, dy = q2[0] - q1[0], q2[1] - q1[1]
        norm = math.hypot(dx, dy)
        normal = (-dy / norm, dx / norm)
        hinge_lines.append((line, normal))
        for h in sorted(int(h) for h in tree.query(line)):
            if h == sa or h == sb:
                continue
            for piece in _segment_pieces(line, polys[h]):
                m = piece.interpolate(0.5, normalized=True)
                if _covers_both_sides(polys[h], (m.x, m.y), normal):
                    add_constraint([(h, sa), (h, sb)], False, "taco-tortilla")
                    break

    # C3: coincident same-side creases must nest.
    for k1 in range(len(hinges)):
        line1, normal1 = hinge_lines[k1]
        (a, b, _, p1, p2) = hinges[k1][:5]
        for k2 in range(k1 + 1, len(hinges)):
            ticker.check_time()
            (c, d, _, r1, r2) = hinges[k2][:5]
            if len({a, b, c, d}) != 4:
                continue
            line2, _ = hinge_lines[k2]
            # Collinear with positive-length overlap?
            if line1.distance(ShapelyPoint(r1)) > 1e-7 or line1.distance(
                ShapelyPoint(r2)
            ) > 1e-7:
                continue
            overlap = line1.intersection(line2)
            if not isinstance(overlap, LineString) or overlap.length <= 1e-7:
                continue
            m = overlap.interpolate(0.5, normalized=True)
            side1 = _taco_side(polys[a], polys[b], (m.x, m.y), normal1)
            side2 = _taco_side(polys[c], polys[d], (m.x, m.y), normal1)
            if side1 == 0 or side1 != side2:
                continue
            add_constraint([(c, a), (c, b), (d, a), (d, b)], False, "taco-taco")

    # Backtracking over pair variables with parity propagation and global
    # acyclicity. Deterministic: canonical variable order, True tried first.
    var_keys = sorted(pair_set)
    var_index = {k: i for i, k in enumerate(var_keys)}
    cons_of_var: dict[int, list[int]] = {i: [] for i in range(len(var_keys))}
    for ci, (terms, _, _) in enumerate(constraints):
        for key, _neg in terms:
            cons_of_var[var_index[key]].append(ci)

    assignment: dict[int, bool] = {}

    def propagate(start: list[tuple[int, bool]]) -> tuple[bool, list[int]]:
        """Assign vars, then push parity consequences. Returns (ok, trail)."""
        trail: list[int] = []
        queue = list(start)
        while queue:
            vi, val = queue.pop(0)
            if vi in assignment:
                if assignment[vi] != val:
                    return False, trail
                continue
            assignment[vi] = val
            trail.append(vi)
            ticker.tick()
            for ci in cons_of_var[vi]:
                terms, parity, _tag = constraints[ci]
                unknown = None
                acc = parity
                ok = True
                for key, neg in terms:
                    k = var_index[key]
                    if k in assignment:
                        acc ^= assignment[k] ^ neg
                    elif unknown is None:
                        unknown = (k, neg)
                    else:
                        ok = False
                        break
                if not ok:
                    continue
                if unknown is None:
                    if acc:  # parity violated
                        return False, trail
                else:
                    k, neg = unknown
                    queue.append((k, acc ^ neg))
        if _has_cycle():
            return False, trail
        return True, trail

    def _has_cycle() -> bool:
        adjacency: dict[int, list[int]] = {i: [] for i in range(ns)}
        for vi, val in assignment.items():
            i, j = var_keys[vi]
            hi, lo = (i, j) if val else (j, i)
            adjacency[lo].append(hi)  # edge lower -> upper
        color = [0] * ns
        stack: list[tuple[int, int]] = []
        for s in range(ns):
            if color[s]:
                continue
            stack.append((s, 0))
            color[s] = 1
            while stack:
                node, k = stack[-1]
                if k < len(adjacency[node]):
                    stack[-1] = (node, k + 1)
                    nxt = adjacency[node][k]
                    if color[nxt] == 1:
                        return True
                    if color[nxt] == 0:
                        color[nxt] = 1
                        stack.append((nxt, 0))
                else:
                    color[node] = 2
                    stack.pop()
        return False

    def undo(trail: list[int]) -> None:
        for vi in trail:
            del assignment[vi]

    # Seed unary constraints.
    seeds = []
    for terms, parity, _tag in constraints:
        if len(terms) == 1:
            key, neg = terms[0]
            seeds.append((var_index[key], parity ^ neg))
    ok, trail0 = propagate(seeds)
    if not ok:
        undo(trail0)
        return FoldabilityVerdict(
            Status.GLOBALLY_INVALID,
            violations=violations + [(None, "no-consistent-layer-order")],
            nodes_used=ticker.nodes,
        )

    # Decide the most-constrained variables first (static, deterministic).
    base_order = sorted(
        range(len(var_keys)), key=lambda vi: (-len(cons_of_var[vi]), var_keys[vi])
    )
    seed_assignment = dict(assignment)

    class _Restart(Exception):
        pass

    def search(order: list[int], pos: int, limit: int) -> bool:
        while pos < len(order) and order[pos] in assignment:
            pos += 1
        if pos == len(order):
            return True
        if ticker.nodes > limit:
            raise _Restart()
        vi = order[pos]
        for val in (True, False):
            ok, trail = propagate([(vi, val)])
            if ok and search(order, pos + 1, limit):
                return True
            undo(trail)
        return False

    # Seeded restarts with escalating node limits: any single exhaustive run
    # proves unsatisfiability; a tripped limit moves on to a reshuffled order.
    import random as _random
    import sys as _sys

    _sys.setrecursionlimit(max(_sys.getrecursionlimit(), len(var_keys) + 2000))
    attempt = 0
    limit_step = max(2000, len(var_keys) * 4)
    while True:
        order = list(base_order)
        if attempt == 0:
            # The heuristic order gets half the node budget before any
            # diversification.
            remaining = max(limit_step, (ticker.max_nodes - ticker.nodes) // 2)
            limit = ticker.nodes + remaining
        else:
            _random.Random(attempt).shuffle(order)
            limit = ticker.nodes + limit_step * (4 ** min(attempt - 1, 8))
        try:
            if search(order, 0, limit):
                break
            return FoldabilityVerdict(
                Status.GLOBALLY_INVALID,
                violations=violations + [(None, "no-consistent-layer-order")],
                nodes_used=ticker.nodes,
            )
        except _Restart:
            assignment.clear()
            assignment.update(seed_assignment)
            attempt += 1
            ticker.check_time()

    # Topological order of supers, bottom to top, smallest index first.
    import heapq

    below: dict[int, set[int]] = {i: set() for i in range(ns)}
    out_edges: dict[int, list[int]] = {i: [] for i in range(ns)}
    for vi, val in assignment.items():
        i, j = var_keys[vi]
        hi, lo = (i, j) if val else (j, i)
        below[hi].add(lo)
        out_edges[lo].append(hi)
    heap = [i for i in range(ns) if not below[i]]
    heapq.heapify(heap)
    topo: list[int] = []
    while heap:
        n = heapq.heappop(heap)
        topo.append(n)
        for m in out_edges[n]:
            below[m].discard(n)
            if not below[m]:
                heapq.heappush(heap, m)
    if len(topo) != ns:
        return FoldabilityVerdict(
            Status.GLOBALLY_INVALID,
            violations=violations + [(None, "layer-order-cyclic")],
            nodes_used=ticker.nodes,
        )

    layer_order: list[int] = []
    for si in topo:
        layer_order.extend(supers[si].members)
    above_faces: dict[tuple[int, int], bool] = {}
    for vi, val in assignment.items():
        i, j = var_keys[vi]
        for fi in supers[i].members:
            for fj in supers[j].members:
                above_faces[(fi, fj)] = val
                above_faces[(fj, fi)] = not val
    witness = FoldedState(
        transforms=list(geometry.transforms),
        orientations=list(geometry.orientations),
        layer_order=layer_order,
        above=above_faces,
    )
    return FoldabilityVerdict(Status.VALID, witness=witness, nodes_used=ticker.nodes)


def is_foldable(cp: CreasePattern, budget: SolverBudget = DEFAULT_BUDGET) -> FoldabilityVerdict:
    """Two-stage validation: local vertex checks, then the layer search."""
    bad = local_violations(cp)
    if bad:
        return FoldabilityVerdict(Status.LOCALLY_INVALID, violations=list(bad))
    try:
        geometry = compute_folded_geometry(cp)
    except DisconnectedFaces:
        return FoldabilityVerdict(
            Status.LOCALLY_INVALID, violations=[(None, "disconnected-faces")]
        )
    return solve_layer_order(cp, geometry, budget)


def fold(cp: CreasePattern, budget: SolverBudget = DEFAULT_BUDGET) -> FoldedState:
    """Solve and return the witness; raises on non-foldable patterns."""
    verdict = is_foldable(cp, budget)
    if not verdict.valid:
        raise SolverError(f"pattern is not flat-foldable: {verdict.status.value}")
    return verdict.witness
