"""Dialogues, turns and JSONL datasets, plus descriptive statistics."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .errors import GqlForgeError, InvariantError, ParseError
from .graph_store import PLACEHOLDER_TOKENS


class Pattern(str, Enum):
    """The six follow-up expansion patterns; ``description`` is what prompts show."""

    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"
    P6 = "P6"

    @property
    def title(self) -> str:
        return _TITLES[self]

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self]

    @property
    def index(self) -> int:
        return int(self.value[1])


_TITLES = {
    Pattern.P1: "Attribute Follow-up",
    Pattern.P2: "Temporal Shift",
    Pattern.P3: "Relation Extension",
    Pattern.P4: "Same-Type Entity",
    Pattern.P5: "Aggregation Calculation",
    Pattern.P6: "Conditional Filtering",
}

_DESCRIPTIONS = {
    Pattern.P1: "Ask about another attribute of an entity from the previous turn.",
    Pattern.P2: "Move the previous question to a different point in time.",
    Pattern.P3: "Follow a relationship from an entity already discussed.",
    Pattern.P4: "Repeat the question for another entity of the same type, "
                "enabling comparative reasoning between multiple entities.",
    Pattern.P5: "Ask for an aggregate such as an average, sum, maximum or count.",
    Pattern.P6: "Narrow the previous list of results with a condition.",
}

INITIAL = "Initial"
_TOKEN_RE = re.compile("|".join(re.escape(t) for t in PLACEHOLDER_TOKENS))


def pattern_from_tag(tag) -> Pattern | None:
    if tag is None or tag == INITIAL:
        return None
    try:
        return Pattern(tag)
    except ValueError as exc:
        raise ParseError(f"unknown pattern tag {tag!r}") from exc


def has_placeholder(text: str) -> bool:
    return _TOKEN_RE.search(text) is not None


@dataclass(frozen=True)
class Turn:
    round: int
    question_raw: str
    question_complete: str
    gql: str
    answer: tuple = ()
    pattern: Pattern | None = None
    entities: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "question_raw": self.question_raw,
            "question_complete": self.question_complete,
            "gql": self.gql,
            "answer": [list(v) if isinstance(v, tuple) else v for v in self.answer],
            "pattern": self.pattern.value if self.pattern else INITIAL,
            "entities": list(self.entities),
            "relations": list(self.relations),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Turn":
        answer = tuple(tuple(v) if isinstance(v, list) else v for v in doc.get("answer", []))
        return cls(
            round=int(doc["round"]),
            question_raw=doc.get("question_raw", doc.get("question_complete", "")),
            question_complete=doc["question_complete"],
            gql=doc["gql"],
            answer=answer,
            pattern=pattern_from_tag(doc.get("pattern")),
            entities=tuple(doc.get("entities", [])),
            relations=tuple(doc.get("relations", [])),
        )


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]
    meta: dict = field(default_factory=dict, compare=True, hash=False)

    @property
    def from_forge(self) -> bool:
        return self.meta.get("source") == "forge"

    def to_dict(self) -> dict:
        return {"id": self.id, "meta": self.meta, "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Dialogue":
        return cls(str(doc["id"]), tuple(Turn.from_dict(t) for t in doc["turns"]), dict(doc.get("meta", {})))


def check_dialogue(d: Dialogue, parse_gql: bool = True) -> None:
    """Raise InvariantError on the first broken dialogue invariant."""
    if not d.turns:
        raise InvariantError(d.id, "dialogue has no turns")
    rounds = [t.round for t in d.turns]
    if rounds != list(range(1, len(rounds) + 1)):
        raise InvariantError(d.id, f"rounds must be 1..m consecutive, got {rounds}")
    if d.turns[0].pattern is not None:
        raise InvariantError(d.id, "the first turn has no expansion pattern")
    for t in d.turns:
        if has_placeholder(t.question_complete):
            raise InvariantError(d.id, f"round {t.round}: complete question still has a placeholder")
        if parse_gql:
            from .gql import parse

            try:
                parse(t.gql)
            except GqlForgeError as exc:
                raise InvariantError(d.id, f"round {t.round}: gql does not parse: {exc}") from exc
    if d.from_forge:
        if not 5 <= len(d.turns) <= 8:
            raise InvariantError(d.id, f"forge dialogues have 5 to 8 rounds, got {len(d.turns)}")
        if not interdependent(d):
            raise InvariantError(d.id, "a follow-up turn shares no entity with earlier turns")


def interdependent(d: Dialogue) -> bool:
    seen: set[str] = set(d.turns[0].entities)
    for t in d.turns[1:]:
        if not (set(t.entities) & seen) and t.pattern is not Pattern.P4:
            return False
        seen |= set(t.entities)
    return True


# --- JSONL I/O ----------------------------------------------------------------


def dumps_dialogue(d: Dialogue) -> str:
    return json.dumps(d.to_dict(), ensure_ascii=False, sort_keys=False)


def write_dataset(dialogues: Iterable[Dialogue], path) -> None:
    dialogues = list(dialogues)
    for d in dialogues:
        check_dialogue(d)
    lines = [dumps_dialogue(d) + "\n" for d in dialogues]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_dataset(path, check: bool = True) -> list[Dialogue]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = Dialogue.from_dict(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed dialogue record: {exc!r}", lineno) from exc
            if check:
                check_dialogue(d)
            out.append(d)
    return out


# --- statistics -------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetStats:
    data_points: int
    total_gqls: int
    total_entities: int
    total_relations: int

    def _avg(self, total: int) -> float:
        return total / self.data_points if self.data_points else 0.0

    @property
    def avg_turns(self) -> float:
        return self._avg(self.total_gqls)

    @property
    def avg_entities(self) -> float:
        return self._avg(self.total_entities)

    @property
    def avg_relations(self) -> float:
        return self._avg(self.total_relations)

    def to_dict(self) -> dict[str, Any]:
        return {
            "data_points": self.data_points,
            "total_gqls": self.total_gqls,
            "avg_turns": self.avg_turns,
            "avg_entities": self.avg_entities,
            "avg_relations": self.avg_relations,
        }


def compute_stats(dialogues: Iterable[Dialogue]) -> DatasetStats:
    n = gqls = ents = rels = 0
    for d in dialogues:
        n += 1
        gqls += len(d.turns)
        ents += len({e for t in d.turns for e in t.entities})
        rels += len({r for t in d.turns for r in t.relations})
    return DatasetStats(n, gqls, ents, rels)


def shuffle_split(dialogues: list[Dialogue], fractions=(0.8, 0.1, 0.1), seed=0) -> list[list[Dialogue]]:
    """Seeded shuffle, then cut into consecutive parts by ``fractions``."""
    items = list(dialogues)
    random.Random(seed).shuffle(items)
    total = sum(fractions)
    parts, start = [], 0
    for i, frac in enumerate(fractions):
        end = len(items) if i == len(fractions) - 1 else start + round(len(items) * frac / total)
        parts.append(items[start:end])
        start = end
    return parts
