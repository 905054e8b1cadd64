"""Bundled agent clients: scripted replay and a seeded random baseline.

An agent is anything with ``act(observation) -> str | None``; returning None
ends the episode. External model connectors live outside the core.
"""

from __future__ import annotations

import json
import random

from .env import Observation


class ScriptedAgent:
    """Replays a fixed list of raw action texts, then stops."""

    def __init__(self, actions: list):
        self.actions = [a if isinstance(a, str) else json.dumps(a) for a in actions]
        self._next = 0

    def act(self, obs: Observation) -> str | None:
        if self._next >= len(self.actions):
            return None
        raw = self.actions[self._next]
        self._next += 1
        return raw


class RandomAgent:
    """Emits schema-legal random single creases on a half-unit lattice."""

    def __init__(self, seed: int = 0, max_actions: int | None = None):
        self.rng = random.Random(seed)
        self.max_actions = max_actions
        self._emitted = 0

    def act(self, obs: Observation) -> str | None:
        if self.max_actions is not None and self._emitted >= self.max_actions:
            return None
        self._emitted += 1
        while True:
            p1 = (self.rng.randint(0, 20) / 2.0, self.rng.randint(0, 20) / 2.0)
            p2 = (self.rng.randint(0, 20) / 2.0, self.rng.randint(0, 20) / 2.0)
            if p1 != p2:
                break
        assignment = self.rng.choice(["M", "V"])
        return json.dumps(
            {"action": "add_crease", "p1": list(p1), "p2": list(p2), "assignment": assignment}
        )


def load_script(path) -> list[str]:
    """Script file: {"actions": [action objects or raw strings]}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    actions = doc["actions"] if isinstance(doc, dict) else doc
    return [a if isinstance(a, str) else json.dumps(a) for a in actions]
