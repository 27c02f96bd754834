"""Deterministic template-driven stand-in for the chat model.

Every reply is a pure function of (prompt, seed).  Questions come from the
frame grammar in :mod:`frames`, so the GQL, reverse and reformulation paths
can understand them again.  A fault switch corrupts GQL replies on demand,
which is how the repair loops are exercised offline.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import random
import re
from dataclasses import dataclass

from ..dialogue import Pattern
from ..errors import GqlForgeError, UnrenderableError
from ..gql import parse
from ..gql.ast import Property, walk
from . import frames as fr
from .frames import Frame, Lexicon
from .prompts import GeneratorOutput, Prompt, PromptKind, render_sections

FAULT_KINDS = ("syntax", "semantic", "permanent")

# Token-level corruptions the repair path knows how to undo.
_MISSPELLINGS = {"RETRUN": "RETURN", "MACTH": "MATCH", "WHRE": "WHERE", "LIMT": "LIMIT", "ORDR": "ORDER"}


def stable_unit(*parts) -> float:
    """Uniform number in [0, 1) from a stable hash of ``parts``."""
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**64


@dataclass
class FaultConfig:
    kind: str = "syntax"
    rate: float = 0.0
    rounds: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"fault kind must be one of {FAULT_KINDS}")
        self.rounds = tuple(self.rounds)

    @property
    def active(self) -> bool:
        return self.rate > 0 or bool(self.rounds)


class MockGenerator:
    """Offline generator; safe to share between threads (it holds no mutable state)."""

    def __init__(self, lexicon: Lexicon | None = None, faults: FaultConfig | None = None,
                 reference_date: str | None = None):
        self.lexicon = lexicon
        self.faults = faults or FaultConfig()
        self.reference_date = reference_date or (lexicon.latest_date if lexicon else None)

    @classmethod
    def for_graph(cls, graph, **kwargs) -> "MockGenerator":
        return cls(Lexicon.from_graph(graph), **kwargs)

    def generate(self, prompt: Prompt, seed=0) -> GeneratorOutput:
        kind = prompt.kind
        if kind is PromptKind.QUESTION:
            raw, complete = self._question(prompt, seed)
            return GeneratorOutput(kind, render_sections(raw, complete), raw, complete)
        if kind is PromptKind.GQL:
            return GeneratorOutput(kind, self._gql(prompt, seed))
        if kind is PromptKind.REVERSE:
            return GeneratorOutput(kind, self._reverse(prompt))
        if kind is PromptKind.REPAIR:
            return GeneratorOutput(kind, self._repair(prompt))
        if kind is PromptKind.REFORMULATE:
            return GeneratorOutput(kind, self._reformulate(prompt))
        raise UnrenderableError(f"no mock template for prompt kind {kind!r}")

    # -- question generation ----------------------------------------------------

    def _question(self, prompt: Prompt, seed) -> tuple[str, str]:
        slots = prompt.slots
        schema = slots["schema"]
        pattern: Pattern | None = slots.get("pattern")
        rng = random.Random(f"question:{seed}:{pattern}:{slots.get('round')}")
        if pattern is None:
            text = fr.render(self._opening_frame(schema, slots.get("focus") or {}, rng))
            return text, text
        history = slots.get("history") or ()
        prev = _turn_frame(history[-1], schema) if history else None
        types = slots.get("entity_types") or {}
        choice = slots.get("choice")
        entities = list(choice.entities) if choice else []
        relations = list(choice.relations) if choice else []
        anchor_type = types.get(entities[0]) if entities else (prev.anchor_type if prev else None)
        if anchor_type is None:
            raise UnrenderableError(f"{pattern.value} needs an entity to talk about")
        tok = fr.token_of(schema, anchor_type)
        asked = _asked_properties(history, schema)
        build = {
            Pattern.P1: self._p1, Pattern.P2: self._p2, Pattern.P3: self._p3,
            Pattern.P4: self._p4, Pattern.P5: self._p5, Pattern.P6: self._p6,
        }[pattern]
        return build(schema, prev, anchor_type, tok, relations, asked, rng)

    def _opening_frame(self, schema, focus: dict, rng: random.Random) -> Frame:
        ftype, prop = focus.get("type"), focus.get("prop")
        if ftype is None:
            ftype = rng.choice(fr.entity_types(schema))
        if prop is None or (prop not in fr.askable_props(schema, ftype) and not fr.dated_links(schema, ftype)):
            prop = rng.choice(fr.askable_props(schema, ftype) or [None])
        tok = fr.token_of(schema, ftype)
        for rel, dated in fr.dated_links(schema, ftype):
            if prop in fr.askable_props(schema, dated) and prop not in fr.askable_props(schema, ftype):
                return Frame("prop_dated", ftype, tok, prop=prop, target=dated, relation=rel, date="[d]")
        if prop in fr.numeric_props(schema, ftype):
            partners = [
                (et.name, fr.other_end(schema, et.name, ftype))
                for et in schema.edges_touching(ftype)
            ]
            partners = [(r, u) for r, u in partners if u in fr.entity_types(schema) and u != ftype]
            if partners and rng.random() < 0.5:
                rel, other = rng.choice(partners)
                return Frame("top", other, fr.token_of(schema, other), prop=prop, target=ftype,
                             relation=rel, highest=rng.random() < 0.7)
            links = [(r, d) for r, d in fr.dated_links(schema, ftype) if prop in fr.askable_props(schema, d)]
            if links and rng.random() < 0.5:
                rel, dated = links[0]
                return Frame("prop_dated", ftype, tok, prop=prop, target=dated, relation=rel, date="[d]")
        if prop is None:
            raise UnrenderableError(f"type {ftype!r} has no askable property")
        return Frame("prop", ftype, tok, prop=prop)

    def _p1(self, schema, prev, anchor_type, tok, relations, asked, rng):
        if prev is not None and prev.kind == "prop_dated" and prev.anchor_type == anchor_type:
            fresh = [p for p in fr.askable_props(schema, prev.target) if (prev.target, p) not in asked]
            if fresh:
                prop = rng.choice(fresh)
                frame = Frame("prop_dated", anchor_type, tok, prop=prop, target=prev.target,
                              relation=prev.relation, date=_date_token(schema, prev.target))
                return f"And what's its {fr.words(prop)}?", fr.render(frame)
        props = fr.askable_props(schema, anchor_type)
        fresh = [p for p in props if (anchor_type, p) not in asked] or props
        if not fresh:
            raise UnrenderableError(f"type {anchor_type!r} has no askable property")
        prop = rng.choice(fresh)
        return f"And what's its {fr.words(prop)}?", fr.render(Frame("prop", anchor_type, tok, prop=prop))

    def _p2(self, schema, prev, anchor_type, tok, relations, asked, rng):
        links = [(r, d) for r, d in fr.dated_links(schema, anchor_type) if not relations or r in relations]
        if not links:
            raise UnrenderableError("no dated relation for a temporal shift")
        rel, dated = links[0]
        dtok = _date_token(schema, dated)
        if prev is not None and prev.prop and prev.prop in fr.askable_props(schema, dated):
            prop = prev.prop
            raw = f"And on {dtok}?" if prev.kind == "prop_dated" else f"What was it on {dtok}?"
        else:
            prop = rng.choice(fr.numeric_props(schema, dated) or fr.askable_props(schema, dated))
            raw = f"What was its {fr.words(prop)} on {dtok}?"
        frame = Frame("prop_dated", anchor_type, tok, prop=prop, target=dated, relation=rel, date=dtok)
        return raw, fr.render(frame)

    def _p3(self, schema, prev, anchor_type, tok, relations, asked, rng):
        rel = relations[0] if relations else None
        target = fr.other_end(schema, rel, anchor_type) if rel else None
        if target is None:
            raise UnrenderableError("relation extension needs a relation touching the entity")
        frame = Frame("neighbors", anchor_type, tok, target=target, relation=rel)
        return f"Which {fr.words(target)} records is it linked to through {fr.words(rel)}?", fr.render(frame)

    def _p4(self, schema, prev, anchor_type, tok, relations, asked, rng):
        if prev is None or prev.anchor_type != anchor_type:
            props = fr.askable_props(schema, anchor_type)
            frame = Frame("prop", anchor_type, tok, prop=rng.choice(props))
        else:
            frame = prev.with_anchor(tok)
            if frame.date is not None:
                frame = Frame(**{**frame.__dict__, "date": _date_token(schema, frame.target)})
            if frame.kind == "filter":
                frame = Frame(**{**frame.__dict__, "number": "[m]"})
        return f"How about {tok}?", fr.render(frame)

    def _p5(self, schema, prev, anchor_type, tok, relations, asked, rng):
        for rel in relations or [et.name for et in schema.edges_touching(anchor_type)]:
            target = fr.other_end(schema, rel, anchor_type)
            nums = fr.numeric_props(schema, target) if target else []
            if nums:
                break
        else:
            raise UnrenderableError("aggregation needs a numeric property on a related type")
        t, r = fr.words(target), fr.words(rel)
        if rng.random() < 0.2:
            frame = Frame("count", anchor_type, tok, target=target, relation=rel)
            return f"How many {t} records does it have through {r}?", fr.render(frame)
        prop, agg = rng.choice(nums), rng.choice(sorted(fr.AGG_WORDS))
        frame = Frame("agg", anchor_type, tok, prop=prop, target=target, relation=rel, agg=agg)
        return f"What's the {fr.AGG_WORDS[agg]} {fr.words(prop)} across its {t} records?", fr.render(frame)

    def _p6(self, schema, prev, anchor_type, tok, relations, asked, rng):
        if prev is None or prev.kind not in ("neighbors", "filter"):
            raise UnrenderableError("conditional filtering needs a previous list answer")
        nums = fr.numeric_props(schema, prev.target)
        if not nums:
            raise UnrenderableError("no numeric property to filter on")
        prop = rng.choice(nums)
        frame = Frame("filter", prev.anchor_type, fr.token_of(schema, prev.anchor_type), prop=prop,
                      target=prev.target, relation=prev.relation, number="[m]")
        return f"Which of them have {fr.words(prop)} of at least [m]?", fr.render(frame)

    # -- GQL generation ------------------------------------------------------------

    def translate(self, question: str, schema) -> str:
        frame = fr.parse_question(question, schema, self.lexicon) or self._keyword_frame(question, schema)
        if frame is None:
            # A wrong but well-formed guess, as a model would give.
            first = schema.node_types[0].name
            return f"MATCH (v1:{first}) RETURN COUNT(v1)"
        return fr.to_gql(frame, schema)

    def _gql(self, prompt: Prompt, seed) -> str:
        schema = prompt.slots["schema"]
        gql = self.translate(prompt.slots["QUESTION"], schema)
        if self._fault_now(prompt, seed):
            gql = self._corrupt(gql, schema, seed)
        return gql

    def _fault_now(self, prompt: Prompt, seed) -> bool:
        f = self.faults
        if not f.active:
            return False
        if f.rounds:
            return prompt.slots.get("round") in f.rounds
        return stable_unit("fault", prompt.rendered_text, seed) < f.rate

    def _corrupt(self, gql: str, schema, seed) -> str:
        kind = self.faults.kind
        if kind == "semantic":
            other = schema.node_types[-1].name
            return f"MATCH (v1:{other}) RETURN COUNT(v1)"
        if kind == "permanent":
            return gql.replace(")", "", 1) + " )("
        variant = int(stable_unit("variant", gql, seed) * 3)
        if variant == 0:
            return gql.replace("RETURN", "RETRUN", 1)
        if variant == 1:
            return gql.replace("MATCH", "MACTH", 1)
        if "]->" in gql:
            return gql.replace("]->", "]>", 1)
        return gql.replace("RETURN", "RETRUN", 1)

    def _keyword_frame(self, question: str, schema) -> Frame | None:
        """Loose reading of free-form questions: entity, type, property and superlative words."""
        if self.lexicon is None:
            return None
        mentions = [m for m in self.lexicon.find_mentions(question) if schema.node_type(self.lexicon.type_of(m))]
        if not mentions:
            return None
        entity = mentions[0]
        etype = self.lexicon.type_of(entity)
        low = question.lower()
        stripped = re.sub(r"(?<!\w)" + re.escape(entity.lower()) + r"(?!\w)", " ", low)
        named = [t for t in fr.entity_types(schema) if re.search(r"\b" + re.escape(fr.words(t)) + r"\b", stripped)]
        target = next((t for t in named if t != etype), etype)
        prop = _guess_property(stripped, fr.askable_props(schema, target))
        date = re.search(r"\d{4}-\d{2}-\d{2}", question)
        highest = re.search(r"\b(highest|largest|biggest|most|top|maximum)\b", low)
        lowest = re.search(r"\b(lowest|smallest|least|minimum|bottom)\b", low)
        anchor = entity
        if target == etype:
            if date and prop is None:
                for rel, dated in fr.dated_links(schema, etype):
                    guess = _guess_property(stripped, fr.askable_props(schema, dated))
                    if guess:
                        return Frame("prop_dated", etype, anchor, prop=guess, target=dated,
                                     relation=rel, date=date.group(0))
            return Frame("prop", etype, anchor, prop=prop) if prop else None
        rel = next((et.name for et in schema.edges_touching(etype)
                    if fr.other_end(schema, et.name, etype) == target), None)
        if rel is None:
            return None
        if prop and (highest or lowest):
            return Frame("top", etype, anchor, prop=prop, target=target, relation=rel, highest=not lowest)
        return Frame("neighbors", etype, anchor, target=target, relation=rel)

    # -- reverse generation ---------------------------------------------------------

    def _reverse(self, prompt: Prompt) -> str:
        schema = prompt.slots["schema"]
        try:
            ast = parse(prompt.slots["GQL"])
        except GqlForgeError:
            return "The query cannot be read."
        frame = fr.from_ast(ast, schema)
        if frame is not None:
            return fr.render(frame)
        return describe_query(ast)

    # -- repair -----------------------------------------------------------------------

    def _repair(self, prompt: Prompt) -> str:
        gql, error = prompt.slots["GQL"], prompt.slots["ERROR"]
        fixed = gql
        for wrong, right in _MISSPELLINGS.items():
            fixed = re.sub(rf"\b{wrong}\b", right, fixed)
        fixed = re.sub(r"\]>", "]->", fixed)
        if fixed != gql:
            return fixed
        schema = prompt.slots.get("schema")
        if schema is not None and re.match(r"(semantic|misaligned|empty)", error, re.I):
            return self.translate(prompt.slots["QUESTION"], schema)
        return gql

    # -- reformulation ------------------------------------------------------------------

    def _reformulate(self, prompt: Prompt) -> str:
        context = prompt.slots.get("structured_context")
        turns = list(context.turns) if context is not None else []
        return Reformulator(prompt.slots["schema"], self.lexicon, self.reference_date).rewrite(
            prompt.slots["QUESTION"], turns)


# --- helpers shared by the question and reformulation paths --------------------------


def _date_token(schema, dated_type: str) -> str:
    return fr.token_of(schema, dated_type) or "[d]"


def _turn_frame(turn, schema) -> Frame | None:
    try:
        return fr.from_ast(parse(turn.gql), schema)
    except GqlForgeError:
        return None


def _asked_properties(history, schema) -> set[tuple[str, str]]:
    asked = set()
    for t in history:
        try:
            ast = parse(t.gql)
        except GqlForgeError:
            continue
        labels = ast.labels()
        for expr in ast.expressions():
            for sub in walk(expr):
                if isinstance(sub, Property) and sub.var in labels:
                    asked.add((labels[sub.var], sub.name))
    return asked


def _guess_property(text: str, props: list[str]) -> str | None:
    """Whole-phrase match first, then a shared word stem of four letters or more."""
    for p in sorted(props, key=lambda p: -len(p)):
        if re.search(r"\b" + re.escape(fr.words(p)) + r"\b", text):
            return p
    best, best_score = None, 0
    tokens = re.findall(r"[a-z]+", text)
    for p in props:
        parts = fr.words(p).split()
        score = sum(1 for part in parts for tok in tokens if len(part) >= 4 and tok[:4] == part[:4])
        if score > best_score:
            best, best_score = p, score
    return best


def describe_query(ast) -> str:
    labels = sorted(set(ast.labels().values()))
    items = []
    for item in ast.returns:
        expr = item.expr
        agg = item.aggregate
        if agg == "COUNT":
            items.append("how many " + " and ".join(fr.words(x) for x in labels) + " nodes there are")
        elif isinstance(expr, Property):
            items.append(f"the {fr.words(expr.name)}")
        else:
            items.append("a computed value")
    return "Tell me " + ", ".join(items) + "."


_TIME_BACK = re.compile(r"\b(yesterday|previous day|day before)\b", re.I)
_ABOUT = re.compile(r"^(?:and\s+)?(?:how|what) about (?P<x>.+?)\??$", re.I)
_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")


class Reformulator:
    """Rule-based coreference and ellipsis resolution over frame-shaped context."""

    def __init__(self, schema, lexicon: Lexicon | None, today: str | None):
        self.schema = schema
        self.lexicon = lexicon
        self.today = today

    def rewrite(self, question: str, turns) -> str:
        q = " ".join(question.split())
        if not turns or fr.parse_question(q, self.schema, self.lexicon) is not None:
            return q
        frames = [_turn_frame(t, self.schema) for t in turns]
        prev = next((f for f in reversed(frames) if f is not None), None)
        base_date = self._context_date(turns, frames)
        out = (
            self._about(q, prev)
            or self._time_shift(q, prev, base_date)
            or self._list_filter(q, prev)
            or self._relation(q, turns, frames)
            or self._aggregate(q, turns, frames)
            or self._property(q, turns, frames, base_date)
        )
        return fr.render(out) if out is not None else q

    def _context_date(self, turns, frames) -> str | None:
        for t, f in zip(reversed(turns), reversed(frames)):
            if f is not None and f.date and _DATE.fullmatch(f.date):
                return f.date
            if re.search(r"\btoday\b", getattr(t, "question", ""), re.I):
                return self.today
        return None

    def _dated(self, frame: Frame, date: str | None) -> Frame:
        if frame.kind == "prop" and date:
            for rel, dated in fr.dated_links(self.schema, frame.anchor_type):
                if frame.prop in fr.askable_props(self.schema, dated):
                    return Frame("prop_dated", frame.anchor_type, frame.anchor, prop=frame.prop,
                                 target=dated, relation=rel, date=date)
        if frame.kind == "prop_dated" and date:
            return Frame(**{**frame.__dict__, "date": date})
        return frame

    def _about(self, q, prev):
        m = _ABOUT.match(q)
        if not m or prev is None or self.lexicon is None:
            return None
        fragment = m.group("x")
        if _TIME_BACK.search(fragment) or _DATE.search(fragment):
            return None
        entity = self.lexicon.fuzzy(fragment)
        if entity is None or self.lexicon.type_of(entity) != prev.anchor_type:
            return None
        frame = prev.with_anchor(entity)
        if frame.kind == "prop_dated" and self.today:
            frame = self._dated(frame, self.today)
        return frame

    def _time_shift(self, q, prev, base_date):
        if prev is None:
            return None
        explicit = _DATE.search(q)
        if explicit:
            date = explicit.group(0)
        elif _TIME_BACK.search(q):
            start = prev.date if prev.date and _DATE.fullmatch(prev.date) else base_date or self.today
            if start is None:
                return None
            date = (_dt.date.fromisoformat(start) - _dt.timedelta(days=1)).isoformat()
        else:
            return None
        shifted = self._dated(prev, date)
        return shifted if shifted.kind == "prop_dated" else None

    def _list_filter(self, q, prev):
        m = re.match(r"^which of them have (?P<p>[\w ]+?) of at least (?P<n>-?[\d.]+)\??$", q, re.I)
        if not m or prev is None or prev.kind not in ("neighbors", "filter"):
            return None
        prop = _guess_property(m.group("p").lower(), fr.numeric_props(self.schema, prev.target))
        if prop is None:
            return None
        return Frame("filter", prev.anchor_type, prev.anchor, prop=prop, target=prev.target,
                     relation=prev.relation, number=fr.parse_number(m.group("n")))

    def _referent(self, turns, frames, accept) -> tuple[str, str] | None:
        """Most recent (entity, type) in answers, then anchors, that ``accept`` allows."""
        for t, f in zip(reversed(turns), reversed(frames)):
            if self.lexicon is not None:
                for value in getattr(t, "answer", ()) or ():
                    if isinstance(value, str) and self.lexicon.type_of(value) and accept(self.lexicon.type_of(value)):
                        return value, self.lexicon.type_of(value)
            if f is not None and accept(f.anchor_type):
                return f.anchor, f.anchor_type
        return None

    def _relation(self, q, turns, frames):
        m = re.match(r"^which (?P<t>[\w ]+?) records is it linked to through (?P<r>[\w ]+)\??$", q, re.I)
        if not m:
            return None
        target = m.group("t").replace(" ", "_")
        rel = m.group("r").replace(" ", "_")
        if self.schema.edge_type(rel) is None:
            return None
        hit = self._referent(turns, frames, lambda t: fr.other_end(self.schema, rel, t) == target)
        if hit is None:
            return None
        return Frame("neighbors", hit[1], hit[0], target=target, relation=rel)

    def _aggregate(self, q, turns, frames):
        m = re.match(r"^what's the (?P<a>average|total|maximum|minimum) (?P<p>[\w ]+?) across its "
                     r"(?P<t>[\w ]+?) records\??$", q, re.I)
        c = re.match(r"^how many (?P<t>[\w ]+?) records does it have through (?P<r>[\w ]+)\??$", q, re.I)
        if not m and not c:
            return None
        g = (m or c).groupdict()
        target = g["t"].replace(" ", "_")

        def link(t):
            if c:
                return fr.other_end(self.schema, g["r"].replace(" ", "_"), t) == target
            return any(fr.other_end(self.schema, et.name, t) == target for et in self.schema.edges_touching(t))

        hit = self._referent(turns, frames, link)
        if hit is None:
            return None
        entity, etype = hit
        rel = g["r"].replace(" ", "_") if c else next(
            et.name for et in self.schema.edges_touching(etype) if fr.other_end(self.schema, et.name, etype) == target)
        if c:
            return Frame("count", etype, entity, target=target, relation=rel)
        prop = _guess_property(g["p"].lower(), fr.numeric_props(self.schema, target))
        if prop is None:
            return None
        agg = {v: k for k, v in fr.AGG_WORDS.items()}[g["a"].lower()]
        return Frame("agg", etype, entity, prop=prop, target=target, relation=rel, agg=agg)

    def _property(self, q, turns, frames, base_date):
        low = q.lower()
        used = [f.prop for f in reversed(frames) if f is not None and f.prop]
        all_props = sorted({p for nt in self.schema.node_types for p in fr.askable_props(self.schema, nt.name)})
        prop = None
        for p in sorted(all_props, key=lambda p: -len(p)):
            if re.search(r"\b" + re.escape(fr.words(p)) + r"\b", low):
                prop = p
                break
        if prop is None:
            # A bare word such as "price": the most recent context property containing it.
            for p in used:
                if any(re.search(r"\b" + re.escape(w) + r"\b", low) for w in fr.words(p).split() if len(w) >= 4):
                    prop = p
                    break
        if prop is None:
            return None

        def has_prop(t):
            if prop in fr.askable_props(self.schema, t):
                return True
            return any(prop in fr.askable_props(self.schema, d) for _, d in fr.dated_links(self.schema, t))

        hit = self._referent(turns, frames, has_prop)
        if hit is None:
            return None
        entity, etype = hit
        if prop in fr.askable_props(self.schema, etype):
            frame = Frame("prop", etype, entity, prop=prop)
            return self._dated(frame, base_date) if base_date else frame
        for rel, dated in fr.dated_links(self.schema, etype):
            if prop in fr.askable_props(self.schema, dated) and (base_date or self.today):
                return Frame("prop_dated", etype, entity, prop=prop, target=dated, relation=rel,
                             date=base_date or self.today)
        return None
