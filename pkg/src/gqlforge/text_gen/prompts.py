"""Prompt construction from template files and parsing of generator replies."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib.resources import files
from pathlib import Path
from typing import Any, Sequence

from ..dialogue import Pattern, Turn
from ..errors import MalformedResponseError, MissingSlotError
from ..graph_store import GraphSchema


class PromptKind(str, Enum):
    QUESTION = "Question"
    GQL = "Gql"
    REVERSE = "Reverse"
    REPAIR = "Repair"
    REFORMULATE = "Reformulate"


TEMPLATE_FILES = {
    PromptKind.QUESTION: "question.txt",
    PromptKind.GQL: "gql.txt",
    PromptKind.REVERSE: "reverse.txt",
    PromptKind.REPAIR: "repair.txt",
    PromptKind.REFORMULATE: "reformulate.txt",
}

MANDATORY = {
    PromptKind.QUESTION: ("SCHEMA", "DIALOGUE_HISTORY", "QUESTION_EXPANDING_PATTERN"),
    PromptKind.GQL: ("SCHEMA", "QUESTION"),
    PromptKind.REVERSE: ("SCHEMA", "GQL"),
    PromptKind.REPAIR: ("QUESTION", "GQL", "ERROR"),
    PromptKind.REFORMULATE: ("QUESTION", "CONTEXT"),
}

OPENING = "None. This is the first turn."


@dataclass(frozen=True)
class Prompt:
    kind: PromptKind
    rendered_text: str
    slots: dict = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class GeneratorOutput:
    kind: PromptKind
    text: str
    question_raw: str | None = None
    question_complete: str | None = None


def load_template(kind: PromptKind, template_dir=None) -> str:
    name = TEMPLATE_FILES[kind]
    if template_dir is not None:
        return Path(template_dir, name).read_text(encoding="utf-8")
    return (files("gqlforge") / "prompts" / name).read_text(encoding="utf-8")


def render_history(history: Sequence[Turn]) -> str:
    if not history:
        return "(empty)"
    lines = []
    for t in history:
        lines.append(f"Round {t.round}")
        lines.append(f"Question: {t.question_complete}")
        lines.append(f"GQL: {t.gql}")
        lines.append(f"Answer: {list(t.answer)}")
    return "\n".join(lines)


def render_pattern(pattern: Pattern | None) -> str:
    if pattern is None:
        return OPENING
    return f"{pattern.value} {pattern.title}: {pattern.description}"


def build_prompt(
    kind,
    schema: GraphSchema | None,
    history: Sequence[Turn] = (),
    pattern: Pattern | None = None,
    gql: str | None = None,
    error: str | None = None,
    question: str | None = None,
    context: str | None = None,
    extras: dict | None = None,
    template_dir=None,
) -> Prompt:
    """Fill the template for ``kind``; raises MissingSlotError for an absent mandatory slot.

    ``extras`` carries structured values (focus entities, round number, ...)
    that only the mock generator reads; they never change the rendered text.
    """
    kind = PromptKind(kind)
    text_slots: dict[str, str | None] = {
        "SCHEMA": schema.describe() if schema is not None else None,
        "DIALOGUE_HISTORY": render_history(history),
        "QUESTION_EXPANDING_PATTERN": render_pattern(pattern),
        "GQL": gql,
        "ERROR": error,
        "QUESTION": question,
        "CONTEXT": context if context is not None else render_history(history),
    }
    needed = MANDATORY[kind] + (("SCHEMA",) if kind is not PromptKind.REPAIR else ())
    for slot in needed:
        if text_slots[slot] is None:
            raise MissingSlotError(slot.lower())
    if text_slots["SCHEMA"] is None:
        text_slots["SCHEMA"] = "(not supplied)"
    template = load_template(kind, template_dir)
    for slot in MANDATORY[kind]:
        if "{" + slot + "}" not in template:
            raise MissingSlotError(slot.lower())
    rendered = template
    for slot, value in text_slots.items():
        if value is not None:
            rendered = rendered.replace("{" + slot + "}", value)
    slots: dict[str, Any] = {k: v for k, v in text_slots.items() if v is not None and "{" + k + "}" in template}
    slots.update(schema=schema, history=tuple(history), pattern=pattern)
    if extras:
        slots.update(extras)
    return Prompt(kind, rendered, slots)


# --- reply sections ---------------------------------------------------------------

_SECTION = re.compile(r"^(Complete Question|Question):[ \t]*(.*)$")


def render_sections(raw: str, complete: str) -> str:
    return f"Question: {raw}\nComplete Question: {complete}"


def parse_sections(text: str) -> tuple[str, str]:
    """Split a question reply into (raw, complete); each section may span lines."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.strip().splitlines():
        m = _SECTION.match(line.strip())
        if m:
            current = m.group(1)
            if current in sections:
                raise MalformedResponseError(f"duplicate {current!r} section")
            sections[current] = [m.group(2)]
        elif current is not None:
            sections[current].append(line.strip())
    for name in ("Question", "Complete Question"):
        if name not in sections:
            raise MalformedResponseError(f"reply has no {name!r} section")
    raw = " ".join(s for s in sections["Question"] if s).strip()
    complete = " ".join(s for s in sections["Complete Question"] if s).strip()
    if not raw or not complete:
        raise MalformedResponseError("empty question section")
    return raw, complete


def output_from_text(kind: PromptKind, text: str) -> GeneratorOutput:
    if kind is PromptKind.QUESTION:
        raw, complete = parse_sections(text)
        return GeneratorOutput(kind, text, raw, complete)
    return GeneratorOutput(kind, strip_fences(text))


def strip_fences(text: str) -> str:
    """Drop markdown code fences a chat model may wrap around a reply."""
    text = text.strip()
    m = re.match(r"^```[\w-]*\n(.*?)\n?```$", text, re.S)
    return m.group(1).strip() if m else text
