"""Runtime configuration: one JSON file, plus an env-var override for the
embedding sidecar address."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .render import DEFAULT_STYLE, RenderStyle
from .scorer_client import resolve_scorer_addr
from .solver import SolverBudget


@dataclass(frozen=True)
class EnvConfig:
    image_size: int = 512
    max_steps: int = 25
    solver_max_nodes: int = 200_000
    solver_max_seconds: float = 5.0
    scorer_addr: str | None = None
    prompt_template_id: str = "fullstep-v1"
    targets_dir: str | None = None
    style: RenderStyle = DEFAULT_STYLE

    def solver_budget(self) -> SolverBudget:
        return SolverBudget(self.solver_max_nodes, self.solver_max_seconds)

    def with_max_steps(self, max_steps: int) -> "EnvConfig":
        return dataclasses.replace(self, max_steps=max_steps)

    def resolved_scorer_addr(self, explicit: str | None = None) -> str | None:
        return resolve_scorer_addr(explicit, self.scorer_addr)


DEFAULT_CONFIG = EnvConfig()

_STYLE_FIELDS = {f.name for f in dataclasses.fields(RenderStyle)}
_CONFIG_FIELDS = {f.name for f in dataclasses.fields(EnvConfig)} - {"style"}


def load_config(path) -> EnvConfig:
    """Read the JSON config; colors are [r, g, b] under the "style" key."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_FIELDS - {"style"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: doc[k] for k in doc if k in _CONFIG_FIELDS}
    style = DEFAULT_STYLE
    if "style" in doc:
        sdoc = doc["style"]
        bad = set(sdoc) - _STYLE_FIELDS
        if bad:
            raise ValueError(f"unknown style keys: {sorted(bad)}")
        coerced = {
            k: tuple(v) if isinstance(v, list) else v for k, v in sdoc.items()
        }
        style = dataclasses.replace(DEFAULT_STYLE, **coerced)
    return EnvConfig(style=style, **kwargs)
