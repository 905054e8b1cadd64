"""Independent checkers used by the tests.

These deliberately avoid the library's own solver/metrics code paths: the
arrangement oracle rebuilds planar subdivisions with GEOS noding, the layer
validator re-derives stacking constraints from first principles against a
witness order, and the mask/IoU oracles use scipy and plain loops.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from shapely.geometry import LineString, MultiLineString, Point as ShPoint, Polygon
from shapely.ops import polygonize, unary_union

from foldforge.foldfile import BOUNDARY, FLAT, MOUNTAIN, VALLEY
from foldforge.pattern import CreasePattern
from foldforge.solver import FoldedState

PROBE = 1e-6


def arrangement_counts(segments: list[tuple]) -> tuple[int, int, int]:
    """(V, E, F) of the arrangement of segments, via GEOS noding/polygonize.

    F counts interior faces only (the outer face is excluded).
    """
    noded = unary_union(MultiLineString([LineString(s) for s in segments]))
    if isinstance(noded, LineString):
        lines = [noded]
    else:
        lines = list(noded.geoms)
    vertices = set()
    edge_count = 0
    for line in lines:
        coords = list(line.coords)
        for c in coords:
            vertices.add((round(c[0], 9), round(c[1], 9)))
        edge_count += len(coords) - 1
    faces = list(polygonize(lines))
    return len(vertices), edge_count, len(faces)


def pattern_arrangement_counts(cp: CreasePattern) -> tuple[int, int, int]:
    segs = [(cp.vertices[a], cp.vertices[b]) for a, b in cp.edges]
    return arrangement_counts(segs)


# -- folded-state validation ---------------------------------------------------


def _folded_polys(cp: CreasePattern, state: FoldedState) -> list[Polygon]:
    out = []
    for fi in range(cp.face_count):
        t = state.transforms[fi]
        out.append(Polygon([t.apply(cp.vertices[v]) for v in cp.faces[fi]]))
    return out


def _hinge_list(cp: CreasePattern, state: FoldedState):
    directed = {}
    for fi, cycle in enumerate(cp.faces):
        n = len(cycle)
        for k in range(n):
            directed[(cycle[k], cycle[(k + 1) % n])] = fi
    hinges = []
    for ei, (a, b) in enumerate(cp.edges):
        assign = cp.assignments[ei]
        if assign == BOUNDARY:
            continue
        f = directed.get((a, b))
        g = directed.get((b, a))
        if f is None or g is None:
            continue
        t = state.transforms[f]
        hinges.append(
            (f, g, assign, t.apply(cp.vertices[a]), t.apply(cp.vertices[b]))
        )
    return hinges


def validate_folded_state(cp: CreasePattern, state: FoldedState) -> list[str]:
    """Re-check a witness from scratch; returns a list of violation strings."""
    problems: list[str] = []
    pos = {fi: k for k, fi in enumerate(state.layer_order)}
    if len(pos) != cp.face_count:
        return [f"layer order covers {len(pos)} of {cp.face_count} faces"]

    # Isometry: all edge lengths preserved.
    worst = 0.0
    for fi, cycle in enumerate(cp.faces):
        t = state.transforms[fi]
        for k in range(len(cycle)):
            p = cp.vertices[cycle[k]]
            q = cp.vertices[cycle[(k + 1) % len(cycle)]]
            before = math.dist(p, q)
            after = math.dist(t.apply(p), t.apply(q))
            worst = max(worst, abs(before - after))
    if worst > 1e-9:
        problems.append(f"edge length error {worst:g}")

    polys = _folded_polys(cp, state)
    hinges = _hinge_list(cp, state)

    # Adjacent faces must map the shared crease to coincident images, and the
    # stacking must respect the crease's fold direction.
    directed = {}
    for fi, cycle in enumerate(cp.faces):
        n = len(cycle)
        for k in range(n):
            directed[(cycle[k], cycle[(k + 1) % n])] = fi
    for ei, (a, b) in enumerate(cp.edges):
        f = directed.get((a, b))
        g = directed.get((b, a))
        if f is None or g is None:
            continue
        fa = state.transforms[f].apply(cp.vertices[a])
        ga = state.transforms[g].apply(cp.vertices[a])
        fb = state.transforms[f].apply(cp.vertices[b])
        gb = state.transforms[g].apply(cp.vertices[b])
        if math.dist(fa, ga) > 1e-9 or math.dist(fb, gb) > 1e-9:
            problems.append(f"edge {ei}: crease images diverge")

    for (f, g, assign, q1, q2) in hinges:
        of, og = state.orientations[f], state.orientations[g]
        if assign == FLAT:
            if of != og:
                problems.append(f"flat hinge {f}-{g} flips orientation")
            continue
        if of == og:
            problems.append(f"folded hinge {f}-{g} does not flip orientation")
            continue
        down = f if of < 0 else g
        up = g if down == f else f
        if assign == VALLEY and not pos[down] > pos[up]:
            problems.append(f"valley hinge {f}-{g}: face-down sheet not above")
        if assign == MOUNTAIN and not pos[down] < pos[up]:
            problems.append(f"mountain hinge {f}-{g}: face-down sheet not below")

    # No face may sit between the two sheets of a taco it crosses.
    folded_hinges = [h for h in hinges if h[2] in (MOUNTAIN, VALLEY)]
    for (f, g, assign, q1, q2) in folded_hinges:
        dx, dy = q2[0] - q1[0], q2[1] - q1[1]
        norm = math.hypot(dx, dy)
        nx, ny = -dy / norm, dx / norm
        for h in range(cp.face_count):
            if h in (f, g):
                continue
            crosses = False
            for t in (0.2, 0.35, 0.5, 0.65, 0.8):
                mx, my = q1[0] + dx * t, q1[1] + dy * t
                up = ShPoint(mx + nx * PROBE, my + ny * PROBE)
                dn = ShPoint(mx - nx * PROBE, my - ny * PROBE)
                if polys[h].contains(up) and polys[h].contains(dn):
                    crosses = True
                    break
            if crosses and min(pos[f], pos[g]) < pos[h] < max(pos[f], pos[g]):
                problems.append(f"face {h} pierces the {f}-{g} taco")

    # Coincident same-side tacos must nest, not interleave.
    for (h1, h2) in itertools.combinations(folded_hinges, 2):
        f, g, _, p1, p2 = h1
        c, d, _, r1, r2 = h2
        if len({f, g, c, d}) != 4:
            continue
        l1 = LineString([p1, p2])
        if l1.distance(ShPoint(r1)) > 1e-7 or l1.distance(ShPoint(r2)) > 1e-7:
            continue
        ov = l1.intersection(LineString([r1, r2]))
        if not isinstance(ov, LineString) or ov.length <= 1e-7:
            continue
        m = ov.interpolate(0.5, normalized=True)
        dx, dy = p2[0] - p1[0], p2[1] - p1[1]
        norm = math.hypot(dx, dy)
        nx, ny = -dy / norm, dx / norm
        side1 = side2 = 0
        for s in (1, -1):
            pt = ShPoint(m.x + s * nx * PROBE, m.y + s * ny * PROBE)
            if polys[f].contains(pt) and polys[g].contains(pt):
                side1 = s
            if polys[c].contains(pt) and polys[d].contains(pt):
                side2 = s
        if side1 == 0 or side1 != side2:
            continue
        lo1, hi1 = sorted((pos[f], pos[g]))
        lo2, hi2 = sorted((pos[c], pos[d]))
        inside_c = lo1 < pos[c] < hi1
        inside_d = lo1 < pos[d] < hi1
        if inside_c != inside_d:
            problems.append(f"tacos {f}-{g} and {c}-{d} interleave")

    # The pairwise relation must agree with the witness order.
    for (i, j), above in state.above.items():
        if above != (pos[i] > pos[j]):
            problems.append(f"above[{i},{j}] inconsistent with layer order")

    return problems


def brute_force_orders(cp: CreasePattern, state: FoldedState):
    """All face orderings passing the from-scratch checks (small patterns,
    no F edges)."""
    good = []
    for perm in itertools.permutations(range(cp.face_count)):
        trial = FoldedState(
            transforms=state.transforms,
            orientations=state.orientations,
            layer_order=list(perm),
            above={},
        )
        if not validate_folded_state(cp, trial):
            good.append(perm)
    return good


# -- mask / IoU oracles --------------------------------------------------------


def scipy_mask(img) -> np.ndarray:
    """Mask via scipy.ndimage: threshold, 8-connected label, fill holes,
    keep the largest filled component."""
    from scipy import ndimage

    rgb = img.pixels.astype(np.float64)
    gray = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    fg = gray < 250
    if not fg.any():
        return np.zeros(fg.shape, dtype=np.uint8)
    labels, n = ndimage.label(fg, structure=np.ones((3, 3), dtype=int))
    best, best_area = None, -1
    for k in range(1, n + 1):
        filled = ndimage.binary_fill_holes(labels == k)
        area = int(filled.sum())
        if area > best_area:
            best, best_area = filled, area
    return best.astype(np.uint8)


def naive_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = union = 0
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            av, bv = bool(a[y, x]), bool(b[y, x])
            if av and bv:
                inter += 1
            if av or bv:
                union += 1
    return inter / union
