"""Opaque prompt-template assets.

Templates are plain text keyed by id; the runtime guarantees only the fixed
image order (documented in the template) and substitution of {foldability}
with the previous action's feedback.
"""

from __future__ import annotations

from importlib import resources


class UnknownTemplate(Exception):
    pass


def load_template(template_id: str) -> str:
    ref = resources.files("foldforge").joinpath(f"assets/prompts/{template_id}.txt")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise UnknownTemplate(f"no prompt template {template_id!r}") from exc


def render_prompt(template_id: str, foldability_feedback: bool) -> str:
    text = load_template(template_id)
    return text.replace("{foldability}", "true" if foldability_feedback else "false")
