"""Closed-loop environment: parse agent actions, validate, execute, observe.

A session starts from a blank sheet and a foldable target. Each submitted
action is parsed strictly, applied tentatively (multi-crease actions are
atomic), validated by the flat-fold solver, and committed only on a valid
verdict. The observation always carries the three images in fixed order
(target, current folded, crease pattern) plus the boolean feedback for the
previous action.
"""

from __future__ import annotations

import json
import math
import time
import uuid
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import EnvConfig, DEFAULT_CONFIG
from .foldfile import FOLD_ASSIGNMENTS, FoldFile, parse_fold, serialize_fold
from .geometry import Point
from .metrics import EpisodeScore, extract_mask, score_episode
from .pattern import (
    Bounds,
    CreasePattern,
    PatternError,
    Segment,
    UnknownVertex,
)
from .render import RasterImage, rasterize, render_crease_pattern, render_folded
from .scorer_client import EmbeddingClient
from .solver import FoldedState, SolverBudget, Status, fold, is_foldable


class ActionError(Exception):
    """Rejected before reaching the geometry stage."""


class Malformed(ActionError):
    pass


class UnknownAction(ActionError):
    pass


class SchemaViolation(ActionError):
    pass


class OutOfBounds(ActionError):
    pass


class SessionClosed(Exception):
    pass


class BudgetExhausted(Exception):
    pass


class AgentTransportError(Exception):
    pass


@dataclass(frozen=True)
class CreaseSpec:
    assignment: str
    p1: Point | None = None
    p2: Point | None = None
    edge_vertices: tuple[int, int] | None = None


@dataclass(frozen=True)
class AgentAction:
    kind: str  # "add_crease" | "add_creases"
    creases: tuple[CreaseSpec, ...]

    def to_json(self) -> str:
        if self.kind == "add_crease":
            return json.dumps(_crease_obj(self.creases[0]))
        return json.dumps(
            {"action": "add_creases", "creases": [_crease_obj(c, bare=True) for c in self.creases]}
        )


def _crease_obj(c: CreaseSpec, bare: bool = False) -> dict:
    obj: dict[str, Any] = {} if bare else {"action": "add_crease"}
    if c.edge_vertices is not None:
        obj["edge_vertices"] = list(c.edge_vertices)
    else:
        obj["p1"] = list(c.p1)
        obj["p2"] = list(c.p2)
    obj["assignment"] = c.assignment
    return obj


def _check_point(value: Any, where: str, bounds: Bounds) -> Point:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise SchemaViolation(f"{where} must be a [x, y] pair of numbers")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise SchemaViolation(f"{where} has a non-finite coordinate")
    if not bounds.contains((x, y), tol=0.0):
        raise OutOfBounds(f"{where} = [{x:g}, {y:g}] lies outside the paper")
    return (x, y)


def _parse_crease(obj: dict, where: str, bounds: Bounds, allowed: set[str]) -> CreaseSpec:
    keys = set(obj)
    if not keys <= allowed:
        raise SchemaViolation(f"{where} has unexpected keys {sorted(keys - allowed)}")
    assignment = obj.get("assignment")
    if assignment not in FOLD_ASSIGNMENTS:
        raise SchemaViolation(f"{where}.assignment must be 'M' or 'V'")
    if "edge_vertices" in obj:
        if "p1" in obj or "p2" in obj:
            raise SchemaViolation(f"{where} mixes edge_vertices with p1/p2")
        ev = obj["edge_vertices"]
        if (
            not isinstance(ev, list)
            or len(ev) != 2
            or any(isinstance(v, bool) or not isinstance(v, int) for v in ev)
        ):
            raise SchemaViolation(f"{where}.edge_vertices must be two vertex indices")
        return CreaseSpec(assignment=assignment, edge_vertices=(ev[0], ev[1]))
    if "p1" not in obj or "p2" not in obj:
        raise SchemaViolation(f"{where} needs p1/p2 or edge_vertices")
    p1 = _check_point(obj["p1"], f"{where}.p1", bounds)
    p2 = _check_point(obj["p2"], f"{where}.p2", bounds)
    return CreaseSpec(assignment=assignment, p1=p1, p2=p2)


def parse_action(raw: str, bounds: Bounds = Bounds()) -> AgentAction:
    """Strictly parse one structured action; anything else is a rejection."""
    if not isinstance(raw, str) or not raw.strip():
        raise Malformed("empty action text")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise Malformed(f"not a single complete JSON object: {exc}") from exc
    if not isinstance(obj, dict):
        raise Malformed("action payload is not an object")
    kind = obj.get("action")
    if kind is None:
        raise SchemaViolation("missing 'action' key")
    if kind == "add_crease":
        spec = _parse_crease(
            obj, "add_crease", bounds, {"action", "p1", "p2", "edge_vertices", "assignment"}
        )
        return AgentAction(kind="add_crease", creases=(spec,))
    if kind == "add_creases":
        if set(obj) != {"action", "creases"}:
            raise SchemaViolation("add_creases takes exactly the 'creases' array")
        creases = obj["creases"]
        if not isinstance(creases, list) or not creases:
            raise SchemaViolation("'creases' must be a non-empty array")
        specs = []
        for k, item in enumerate(creases):
            if not isinstance(item, dict):
                raise SchemaViolation(f"creases[{k}] is not an object")
            specs.append(
                _parse_crease(
                    item, f"creases[{k}]", bounds, {"p1", "p2", "edge_vertices", "assignment"}
                )
            )
        return AgentAction(kind="add_creases", creases=tuple(specs))
    raise UnknownAction(f"unknown action {kind!r}")


@dataclass
class Observation:
    """Images in fixed order: target, current folded, crease pattern."""

    target_img: RasterImage
    current_img: RasterImage
    cp_img: RasterImage
    foldability_feedback: bool
    prompt_template_id: str

    def images(self) -> list[RasterImage]:
        return [self.target_img, self.current_img, self.cp_img]


@dataclass
class Attempt:
    raw: str
    action_json: str | None  # canonical form of the parsed action
    error: str | None  # parse/pattern error class name when rejected early
    verdict: str  # valid | locally_invalid | globally_invalid | unknown | rejected
    accepted: bool
    silhouette_changed: bool | None
    timestamp: float

    def as_dict(self) -> dict:
        return {
            "raw": self.raw,
            "action_json": self.action_json,
            "error": self.error,
            "verdict": self.verdict,
            "accepted": self.accepted,
            "silhouette_changed": self.silhouette_changed,
            "timestamp": self.timestamp,
        }


@dataclass
class EpisodeRecord:
    episode_id: str
    target_name: str
    max_steps: int
    attempts: list[Attempt] = field(default_factory=list)
    final_fold_text: str = ""

    @property
    def steps_attempted(self) -> int:
        return len(self.attempts)

    @property
    def steps_valid(self) -> int:
        return sum(1 for a in self.attempts if a.accepted)

    @property
    def steps_silhouette_changing(self) -> int:
        return sum(1 for a in self.attempts if a.accepted and a.silhouette_changed)

    @property
    def final_fold(self) -> FoldFile:
        return parse_fold(self.final_fold_text)

    def as_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "target_name": self.target_name,
            "max_steps": self.max_steps,
            "attempts": [a.as_dict() for a in self.attempts],
            "final_fold_text": self.final_fold_text,
            "steps_attempted": self.steps_attempted,
            "steps_valid": self.steps_valid,
            "steps_silhouette_changing": self.steps_silhouette_changing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        rec = cls(
            episode_id=d["episode_id"],
            target_name=d.get("target_name", ""),
            max_steps=d["max_steps"],
            final_fold_text=d["final_fold_text"],
        )
        for a in d["attempts"]:
            rec.attempts.append(
                Attempt(
                    raw=a["raw"],
                    action_json=a.get("action_json"),
                    error=a.get("error"),
                    verdict=a["verdict"],
                    accepted=a["accepted"],
                    silhouette_changed=a.get("silhouette_changed"),
                    timestamp=a.get("timestamp", 0.0),
                )
            )
        return rec


@dataclass
class StepResult:
    accepted: bool
    verdict: str
    observation: Observation


class Session:
    """Single-writer episode state; deep copies roll back rejected actions."""

    def __init__(
        self,
        target: FoldFile,
        config: EnvConfig = DEFAULT_CONFIG,
        target_name: str = "",
        episode_id: str | None = None,
    ):
        self.config = config
        self.target = target
        self.target_name = target_name
        self.episode_id = episode_id or uuid.uuid4().hex
        self.cp = CreasePattern.new_blank()
        self.closed = False
        self.last_feedback = True  # true before the first action
        self.last_solver_verdict = None
        budget = config.solver_budget()
        size = config.image_size
        style = config.style

        target_cp = CreasePattern.from_fold_file(target)
        target_state = fold(target_cp, budget)
        self.target_img = rasterize(
            render_folded(target_cp, target_state, "front", style), size, size
        )
        self._folded: FoldedState = fold(self.cp, budget)
        self.current_img = self._render_current()
        self.cp_img = rasterize(render_crease_pattern(self.cp, style), size, size)
        self.record = EpisodeRecord(
            episode_id=self.episode_id,
            target_name=target_name,
            max_steps=config.max_steps,
            final_fold_text=serialize_fold(self.cp.to_fold_file()),
        )

    def _render_current(self) -> RasterImage:
        size = self.config.image_size
        return rasterize(
            render_folded(self.cp, self._folded, "front", self.config.style), size, size
        )

    def observation(self) -> Observation:
        return Observation(
            target_img=self.target_img,
            current_img=self.current_img,
            cp_img=self.cp_img,
            foldability_feedback=self.last_feedback,
            prompt_template_id=self.config.prompt_template_id,
        )

    @property
    def budget_left(self) -> int:
        return self.record.max_steps - self.record.steps_attempted

    def close(self) -> None:
        self.closed = True

    def submit(self, raw: str) -> StepResult:
        """Parse then step; parse failures consume budget and feed back false."""
        self._check_open()
        try:
            action = parse_action(raw, self.cp.bounds)
        except ActionError as exc:
            self._record_attempt(
                raw=raw,
                action_json=None,
                error=type(exc).__name__,
                verdict="rejected",
                accepted=False,
                silhouette_changed=None,
            )
            self.last_feedback = False
            return StepResult(False, f"rejected:{type(exc).__name__}", self.observation())
        return self._step_parsed(action, raw)

    def step(self, action: AgentAction) -> StepResult:
        self._check_open()
        return self._step_parsed(action, action.to_json())

    def _check_open(self) -> None:
        if self.closed:
            raise SessionClosed(f"episode {self.episode_id} is closed")
        if self.record.steps_attempted >= self.record.max_steps:
            raise BudgetExhausted(f"episode {self.episode_id} used its {self.record.max_steps} steps")

    def _resolve(self, spec: CreaseSpec, cp: CreasePattern) -> tuple[Segment, str]:
        if spec.edge_vertices is not None:
            i, j = spec.edge_vertices
            n = cp.vertex_count
            if not (0 <= i < n and 0 <= j < n):
                raise UnknownVertex(f"edge_vertices {spec.edge_vertices} out of range")
            return Segment(cp.vertices[i], cp.vertices[j]), spec.assignment
        return Segment(spec.p1, spec.p2), spec.assignment

    def _step_parsed(self, action: AgentAction, raw: str) -> StepResult:
        tentative = self.cp
        try:
            for spec in action.creases:
                seg, assignment = self._resolve(spec, tentative)
                tentative = tentative.insert_crease(seg, assignment)
        except PatternError as exc:
            self._record_attempt(
                raw=raw,
                action_json=action.to_json(),
                error=type(exc).__name__,
                verdict="rejected",
                accepted=False,
                silhouette_changed=None,
            )
            self.last_feedback = False
            self.last_solver_verdict = None
            return StepResult(False, f"rejected:{type(exc).__name__}", self.observation())

        verdict = is_foldable(tentative, self.config.solver_budget())
        self.last_solver_verdict = verdict
        if verdict.status is Status.VALID:
            old_mask = extract_mask(self.current_img)
            self.cp = tentative
            self._folded = verdict.witness
            self.current_img = self._render_current()
            self.cp_img = rasterize(
                render_crease_pattern(self.cp, self.config.style),
                self.config.image_size,
                self.config.image_size,
            )
            new_mask = extract_mask(self.current_img)
            changed = not np.array_equal(old_mask.bits, new_mask.bits)
            self.record.final_fold_text = serialize_fold(self.cp.to_fold_file())
            self._record_attempt(
                raw=raw,
                action_json=action.to_json(),
                error=None,
                verdict=verdict.status.value,
                accepted=True,
                silhouette_changed=changed,
            )
            self.last_feedback = True
            return StepResult(True, verdict.status.value, self.observation())

        self._record_attempt(
            raw=raw,
            action_json=action.to_json(),
            error=None,
            verdict=verdict.status.value,
            accepted=False,
            silhouette_changed=None,
        )
        self.last_feedback = False
        return StepResult(False, verdict.status.value, self.observation())

    def _record_attempt(self, **kwargs) -> None:
        self.record.attempts.append(Attempt(timestamp=time.time(), **kwargs))

    def score(self, scorer: EmbeddingClient | None = None) -> EpisodeScore:
        return score_episode(
            self.record,
            self.target,
            style=self.config.style,
            scorer=scorer,
            size=self.config.image_size,
            budget=self.config.solver_budget(),
        )


def run_episode(
    target: FoldFile,
    agent,
    max_steps: int | None = None,
    config: EnvConfig = DEFAULT_CONFIG,
    scorer: EmbeddingClient | None = None,
    target_name: str = "",
) -> tuple[EpisodeRecord, EpisodeScore]:
    """Loop observation -> agent -> step until budget or the agent stops.

    The agent is anything with ``act(observation) -> str | None``; transport
    failures finalize the episode with the steps recorded so far.
    """
    if max_steps is not None:
        config = config.with_max_steps(max_steps)
    session = Session(target, config, target_name=target_name)
    while session.budget_left > 0:
        obs = session.observation()
        try:
            raw = agent.act(obs)
        except Exception as exc:  # noqa: BLE001 - agent transport is untrusted
            session.close()
            err = AgentTransportError(str(exc))
            err.record = session.record
            err.score = session.score(scorer)
            raise err from exc
        if raw is None:
            break
        session.submit(raw)
    session.close()
    return session.record, session.score(scorer)
