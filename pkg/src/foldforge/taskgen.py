"""One-step multiple-choice task generation and scoring.

Sequences come from ordered crease scripts executed in this environment, so
consecutive states differ by exactly one accepted action. Instances pair a
reference state with four candidate images; distractors come from other
designs (associative) or from the same sequence (causal: earlier "unfold"
states and later "skip" states are both eligible).
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .config import DEFAULT_CONFIG, EnvConfig
from .env import ActionError, parse_action
from .foldfile import FoldFile, parse_fold, serialize_fold
from .pattern import CreasePattern, PatternError, Segment
from .render import RasterImage, rasterize, render_folded
from .solver import Status, fold, is_foldable

LABELS = ("A", "B", "C", "D")


class TaskgenError(Exception):
    pass


class InfeasiblePrefix(TaskgenError):
    """Script step k (1-based) failed validation."""

    def __init__(self, step: int, reason: str):
        super().__init__(f"script step {step} is not foldable: {reason}")
        self.step = step
        self.reason = reason


class InsufficientStates(TaskgenError):
    pass


class InsufficientPool(TaskgenError):
    pass


class CountMismatch(TaskgenError):
    pass


class ChoiceError(TaskgenError):
    pass


class NoMatch(ChoiceError):
    pass


class InvalidOption(ChoiceError):
    pass


class MultipleMatches(ChoiceError):
    pass


class FoldSequence:
    """States 0..n where state k is the folded result of the first k actions."""

    def __init__(self, design_id: str, states: list[FoldFile], config: EnvConfig = DEFAULT_CONFIG):
        self.design_id = design_id
        self.states = states
        self.config = config
        self._images: dict[tuple[int, str], RasterImage] = {}

    def __len__(self) -> int:
        return len(self.states)

    def image(self, t: int, side: str) -> RasterImage:
        key = (t, side)
        if key not in self._images:
            cp = CreasePattern.from_fold_file(self.states[t])
            state = fold(cp, self.config.solver_budget())
            doc = render_folded(cp, state, side, self.config.style)
            size = self.config.image_size
            self._images[key] = rasterize(doc, size, size)
        return self._images[key]


def build_sequence(
    script: list[str],
    base: FoldFile | None = None,
    design_id: str = "",
    config: EnvConfig = DEFAULT_CONFIG,
) -> FoldSequence:
    """Execute a crease script; every prefix must validate."""
    cp = CreasePattern.from_fold_file(base) if base is not None else CreasePattern.new_blank()
    verdict = is_foldable(cp, config.solver_budget())
    if verdict.status is not Status.VALID:
        raise InfeasiblePrefix(0, f"base state: {verdict.status.value}")
    states = [cp.to_fold_file()]
    for k, raw in enumerate(script, start=1):
        try:
            action = parse_action(raw, cp.bounds)
        except ActionError as exc:
            raise InfeasiblePrefix(k, f"unparseable action: {exc}") from exc
        tentative = cp
        try:
            for spec in action.creases:
                if spec.edge_vertices is not None:
                    i, j = spec.edge_vertices
                    seg_p1 = tentative.vertices[i]
                    seg_p2 = tentative.vertices[j]
                else:
                    seg_p1, seg_p2 = spec.p1, spec.p2
                tentative = tentative.insert_crease(Segment(seg_p1, seg_p2), spec.assignment)
        except (PatternError, IndexError) as exc:
            raise InfeasiblePrefix(k, str(exc)) from exc
        verdict = is_foldable(tentative, config.solver_budget())
        if verdict.status is not Status.VALID:
            raise InfeasiblePrefix(k, verdict.status.value)
        cp = tentative
        states.append(cp.to_fold_file())
    return FoldSequence(design_id, states, config)


@dataclass
class Option:
    label: str
    front: RasterImage
    back: RasterImage
    source: tuple[str, int]  # (design_id, state index)


@dataclass
class MCQInstance:
    reference_front: RasterImage
    reference_back: RasterImage
    options: list[Option]
    correct_label: str
    variant: str  # associative | causal
    provenance: dict = field(default_factory=dict)
    rng_seed: int = 0

    def option(self, label: str) -> Option:
        for o in self.options:
            if o.label == label:
                return o
        raise KeyError(label)


def make_instance(
    seq: FoldSequence,
    t: int,
    variant: str,
    pool: list[FoldSequence],
    seed: int,
) -> MCQInstance:
    """Four options: state t+1 plus three seeded distractors.

    Causal distractors come from the same sequence at indices other than t
    and t+1 and need at least four such states to sample from. Associative
    distractors come from other designs' folded states (the blank state 0 is
    skipped: it looks identical across designs).
    """
    if variant not in ("associative", "causal"):
        raise ValueError(f"unknown variant {variant!r}")
    if not (0 <= t and t + 1 < len(seq.states)):
        raise InsufficientStates(f"state {t + 1} does not exist")
    rng = random.Random(seed)

    if variant == "causal":
        eligible = [i for i in range(len(seq.states)) if i not in (t, t + 1)]
        if len(eligible) < 4:
            raise InsufficientStates(
                f"causal needs >= 4 states besides t and t+1, found {len(eligible)}"
            )
        picks = sorted(rng.sample(eligible, 3))
        sources = [(seq.design_id, i) for i in picks]
        distractors = [(seq, i) for i in picks]
    else:
        usable = [
            (other, i)
            for other in pool
            if other.design_id != seq.design_id
            for i in range(1, len(other.states))
        ]
        if len(usable) < 3:
            raise InsufficientPool(f"associative needs >= 3 foreign states, found {len(usable)}")
        idx = sorted(rng.sample(range(len(usable)), 3))
        distractors = [usable[i] for i in idx]
        sources = [(s.design_id, i) for s, i in distractors]

    entries = [((seq, t + 1), True)] + [(d, False) for d in distractors]
    rng.shuffle(entries)
    options: list[Option] = []
    correct_label = ""
    for label, ((src_seq, idx), is_correct) in zip(LABELS, entries):
        options.append(
            Option(
                label=label,
                front=src_seq.image(idx, "front"),
                back=src_seq.image(idx, "back"),
                source=(src_seq.design_id, idx),
            )
        )
        if is_correct:
            correct_label = label
    return MCQInstance(
        reference_front=seq.image(t, "front"),
        reference_back=seq.image(t, "back"),
        options=options,
        correct_label=correct_label,
        variant=variant,
        provenance={
            "design": seq.design_id,
            "t": t,
            "distractors": sources,
        },
        rng_seed=seed,
    )


_BOXED = re.compile(r"\\boxed\{([^{}]*)\}")


def parse_choice(raw: str) -> str:
    """Accept exactly one line of the form ``\\boxed{X}`` with X in A-D."""
    matches = _BOXED.findall(raw or "")
    if len(matches) > 1:
        raise MultipleMatches(f"found {len(matches)} boxed answers")
    stripped = (raw or "").strip()
    m = _BOXED.fullmatch(stripped)
    if m is None:
        raise NoMatch("payload is not exactly one boxed answer")
    letter = m.group(1)
    if letter not in LABELS:
        raise InvalidOption(f"option {letter!r} is not one of A-D")
    return letter


def score_accuracy(instances: list[MCQInstance], answers: list) -> float:
    """Fraction correct; rejections (None) count as incorrect."""
    if len(instances) != len(answers):
        raise CountMismatch(f"{len(instances)} instances vs {len(answers)} answers")
    if not instances:
        return 0.0
    correct = sum(
        1 for inst, ans in zip(instances, answers) if ans == inst.correct_label
    )
    return correct / len(instances)


def evaluate_raw_answers(instances: list[MCQInstance], raw_texts: list[str]) -> float:
    """Parse each raw answer strictly; anything unparseable scores zero."""
    answers = []
    for raw in raw_texts:
        try:
            answers.append(parse_choice(raw))
        except ChoiceError:
            answers.append(None)
    return score_accuracy(instances, answers)


# -- disk bundles -------------------------------------------------------------


def write_instance(inst: MCQInstance, directory) -> dict:
    """One directory per instance: reference/option PNGs plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    inst.reference_front.save(directory / "reference_front.png")
    inst.reference_back.save(directory / "reference_back.png")
    for opt in inst.options:
        opt.front.save(directory / f"option_{opt.label}_front.png")
        opt.back.save(directory / f"option_{opt.label}_back.png")
    manifest = {
        "variant": inst.variant,
        "correct_label": inst.correct_label,
        "provenance": inst.provenance,
        "rng_seed": inst.rng_seed,
        "options": {o.label: {"design": o.source[0], "state": o.source[1]} for o in inst.options},
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def build_dataset(
    sequences: list[FoldSequence],
    out_dir,
    count: int,
    variant: str,
    seed: int,
) -> list[dict]:
    """Round-robin over eligible (sequence, t) slots; writes an index file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    slots = []
    for seq in sequences:
        for t in range(len(seq.states) - 1):
            if variant == "causal" and len(seq.states) - 2 < 4:
                continue
            slots.append((seq, t))
    if not slots:
        raise InsufficientStates("no eligible (sequence, t) slots for this variant")
    index = []
    for k in range(count):
        seq, t = slots[k % len(slots)]
        inst_seed = seed + k
        inst = make_instance(seq, t, variant, sequences, inst_seed)
        name = f"{variant}_{k:05d}"
        manifest = write_instance(inst, out_dir / name)
        index.append(
            {
                "instance": name,
                "variant": variant,
                "correct_label": inst.correct_label,
                "design": seq.design_id,
                "t": t,
                "seed": inst_seed,
            }
        )
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    return index
