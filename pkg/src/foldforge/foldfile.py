"""FOLD document model: parsing, validation, canonical serialization.

Only the four core arrays are interpreted (vertices_coords, edges_vertices,
edges_assignment, faces_vertices); every other key round-trips opaquely
through ``extra_fields``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

MOUNTAIN = "M"
VALLEY = "V"
BOUNDARY = "B"
FLAT = "F"
ASSIGNMENTS = frozenset({MOUNTAIN, VALLEY, BOUNDARY, FLAT})
FOLD_ASSIGNMENTS = frozenset({MOUNTAIN, VALLEY})

CORE_KEYS = (
    "vertices_coords",
    "edges_vertices",
    "edges_assignment",
    "faces_vertices",
)


class FoldError(Exception):
    """Base class for FOLD document problems."""


class FoldSyntaxError(FoldError):
    """The document is not well-formed."""


class FoldSchemaError(FoldError):
    """A core array is missing or has the wrong shape/type."""


class VertexReferenceError(FoldError):
    """An edge or face references a vertex index that does not exist."""


class LengthMismatchError(FoldError):
    """edges_assignment and edges_vertices have different lengths."""


def _as_float(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FoldSchemaError(f"{where}: expected a number, got {value!r}")
    f = float(value)
    if not math.isfinite(f):
        raise FoldSchemaError(f"{where}: non-finite coordinate {value!r}")
    if f == 0.0:
        f = 0.0  # normalize -0.0 for canonical output
    return f


def _as_index(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FoldSchemaError(f"{where}: expected an integer index, got {value!r}")
    return value


@dataclass(frozen=True)
class FoldFile:
    """Immutable FOLD subset: flat crease pattern on a square sheet."""

    vertices_coords: tuple[tuple[float, float], ...]
    edges_vertices: tuple[tuple[int, int], ...]
    edges_assignment: tuple[str, ...]
    faces_vertices: tuple[tuple[int, ...], ...]
    extra_fields: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        nv = len(self.vertices_coords)
        if len(self.edges_assignment) != len(self.edges_vertices):
            raise LengthMismatchError(
                "edges_assignment has %d entries for %d edges"
                % (len(self.edges_assignment), len(self.edges_vertices))
            )
        for k, (i, j) in enumerate(self.edges_vertices):
            if not (0 <= i < nv and 0 <= j < nv):
                raise VertexReferenceError(f"edge {k} references vertex out of range")
        for k, a in enumerate(self.edges_assignment):
            if a not in ASSIGNMENTS:
                raise FoldSchemaError(f"edge {k}: unknown assignment {a!r}")
        for k, face in enumerate(self.faces_vertices):
            if len(face) < 3:
                raise FoldSchemaError(f"face {k} has fewer than 3 vertices")
            if len(set(face)) != len(face):
                raise FoldSchemaError(f"face {k} repeats a vertex")
            for v in face:
                if not (0 <= v < nv):
                    raise VertexReferenceError(f"face {k} references vertex out of range")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices_coords)

    @property
    def crease_count(self) -> int:
        """Number of interior (non-boundary) edges."""
        return sum(1 for a in self.edges_assignment if a != BOUNDARY)


def parse_fold(text: str | bytes) -> FoldFile:
    """Parse a FOLD document, preserving unknown keys verbatim."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FoldSyntaxError(f"not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FoldSyntaxError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise FoldSyntaxError("top level is not a key-value document")

    for key in CORE_KEYS:
        if key not in doc:
            raise FoldSchemaError(f"missing core array {key!r}")
        if not isinstance(doc[key], list):
            raise FoldSchemaError(f"{key} is not an array")

    coords = []
    for i, entry in enumerate(doc["vertices_coords"]):
        if not isinstance(entry, list) or len(entry) < 2:
            raise FoldSchemaError(f"vertices_coords[{i}] is not a 2D point")
        coords.append((_as_float(entry[0], f"vertices_coords[{i}]"),
                       _as_float(entry[1], f"vertices_coords[{i}]")))

    edges = []
    for i, entry in enumerate(doc["edges_vertices"]):
        if not isinstance(entry, list) or len(entry) != 2:
            raise FoldSchemaError(f"edges_vertices[{i}] is not a vertex pair")
        edges.append((_as_index(entry[0], f"edges_vertices[{i}]"),
                      _as_index(entry[1], f"edges_vertices[{i}]")))

    assigns = []
    for i, entry in enumerate(doc["edges_assignment"]):
        if not isinstance(entry, str):
            raise FoldSchemaError(f"edges_assignment[{i}] is not a string")
        assigns.append(entry)

    faces = []
    for i, entry in enumerate(doc["faces_vertices"]):
        if not isinstance(entry, list):
            raise FoldSchemaError(f"faces_vertices[{i}] is not a vertex list")
        faces.append(tuple(_as_index(v, f"faces_vertices[{i}]") for v in entry))

    extra = {k: v for k, v in doc.items() if k not in CORE_KEYS}
    return FoldFile(
        vertices_coords=tuple(coords),
        edges_vertices=tuple(edges),
        edges_assignment=tuple(assigns),
        faces_vertices=tuple(faces),
        extra_fields=extra,
    )


def serialize_fold(f: FoldFile) -> str:
    """Canonical text form: fixed key order, shortest round-trip decimals.

    Equal FoldFiles serialize to byte-identical text; extra fields are emitted
    after the core arrays, sorted by key. Nested arrays print one row per
    line, the usual FOLD layout.
    """
    doc: dict[str, Any] = {}
    doc["vertices_coords"] = [[x, y] for x, y in f.vertices_coords]
    doc["edges_vertices"] = [[i, j] for i, j in f.edges_vertices]
    doc["edges_assignment"] = list(f.edges_assignment)
    doc["faces_vertices"] = [list(face) for face in f.faces_vertices]
    for key in sorted(f.extra_fields):
        doc[key] = f.extra_fields[key]

    entries = []
    for key, value in doc.items():
        # json emits floats via repr -> shortest round-trip decimal.
        if isinstance(value, list) and value and all(isinstance(e, list) for e in value):
            rows = ",\n".join("    " + json.dumps(e, ensure_ascii=False) for e in value)
            entries.append(f'  "{key}": [\n{rows}\n  ]')
        else:
            entries.append(f'  "{key}": {json.dumps(value, ensure_ascii=False)}')
    return "{\n" + ",\n".join(entries) + "\n}\n"


def load_fold(path) -> FoldFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_fold(fh.read())


def save_fold(f: FoldFile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_fold(f))


@dataclass(frozen=True)
class ComplexityThresholds:
    """Inclusive upper bounds per tier; a count on the boundary stays in the
    lower tier. Vertex bounds are optional and off by default."""

    easy_max_creases: int = 20
    medium_max_creases: int = 60
    easy_max_vertices: int | None = None
    medium_max_vertices: int | None = None


DEFAULT_THRESHOLDS = ComplexityThresholds()

EASY = "Easy"
MEDIUM = "Medium"
HARD = "Hard"
_TIER_RANK = {EASY: 0, MEDIUM: 1, HARD: 2}


def _tier(count: int, easy_max: int, medium_max: int) -> str:
    if count <= easy_max:
        return EASY
    if count <= medium_max:
        return MEDIUM
    return HARD


def classify_complexity(
    vertex_count: int,
    crease_count: int,
    thresholds: ComplexityThresholds = DEFAULT_THRESHOLDS,
) -> str:
    """Tier a design by structural size; monotone in both counts."""
    if vertex_count < 0 or crease_count < 0:
        raise ValueError("counts must be non-negative")
    tier = _tier(crease_count, thresholds.easy_max_creases, thresholds.medium_max_creases)
    if thresholds.easy_max_vertices is not None and thresholds.medium_max_vertices is not None:
        vtier = _tier(vertex_count, thresholds.easy_max_vertices, thresholds.medium_max_vertices)
        if _TIER_RANK[vtier] > _TIER_RANK[tier]:
            tier = vtier
    return tier


@dataclass(frozen=True)
class DesignMeta:
    """Category label plus derived complexity tier."""

    category: str
    complexity: str
    vertex_count: int
    crease_count: int

    @classmethod
    def for_fold(
        cls,
        f: FoldFile,
        category: str = "",
        thresholds: ComplexityThresholds = DEFAULT_THRESHOLDS,
    ) -> "DesignMeta":
        return cls(
            category=category,
            complexity=classify_complexity(f.vertex_count, f.crease_count, thresholds),
            vertex_count=f.vertex_count,
            crease_count=f.crease_count,
        )
