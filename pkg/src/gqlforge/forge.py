"""Dialogue forging: session state, pattern selection, placeholder filling, round loop."""

from __future__ import annotations

import datetime as _dt
import hashlib
import logging
import random
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .dialogue import Dialogue, Pattern, Turn
from .errors import (
    DialogueAbandoned,
    EmptyTypeError,
    GqlForgeError,
    MalformedResponseError,
    NoApplicablePattern,
    TransportError,
    UnboundPlaceholder,
    UnrenderableError,
)
from .gql import execute, parse
from .gql.ast import Literal, Property, walk
from .graph_store import PLACEHOLDER_TOKENS, GraphSchema, PropertyGraph, sample_entity
from .quality import Accepted, QualityConfig, Repaired, TrigramEmbedder, validate_and_optimize
from .text_gen import frames as fr
from .text_gen.prompts import PromptKind, build_prompt

log = logging.getLogger(__name__)

PATTERNS = tuple(Pattern)
BONUS = Fraction(1, 4)


@dataclass
class ForgeConfig:
    rounds_min: int = 5
    rounds_max: int = 8
    retry_budget: int = 3
    seed: int = 0
    worker_count: int = 1

    def __post_init__(self):
        if not 1 <= self.rounds_min <= self.rounds_max:
            raise ValueError("need 1 <= rounds_min <= rounds_max")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")


@dataclass
class SessionState:
    history: list = field(default_factory=list)
    entity_set: dict = field(default_factory=dict)  # node id -> type
    relation_set: set = field(default_factory=set)
    pattern_history: list = field(default_factory=list)
    pattern_weights: dict = field(default_factory=lambda: {p: Fraction(1, 6) for p in PATTERNS})
    target_rounds: int = 5
    seed: object = 0

    def copy(self) -> "SessionState":
        return SessionState(list(self.history), dict(self.entity_set), set(self.relation_set),
                            list(self.pattern_history), dict(self.pattern_weights), self.target_rounds, self.seed)

    def record(self, turn: Turn, graph: PropertyGraph) -> None:
        self.history.append(turn)
        for e in turn.entities:
            self.entity_set[e] = graph.nodes[e].type
        self.relation_set.update(turn.relations)
        if turn.pattern is not None:
            self.pattern_history.append(turn.pattern)


@dataclass(frozen=True)
class PatternChoice:
    pattern: Pattern
    entities: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def new_session(schema: GraphSchema, graph: PropertyGraph, config: ForgeConfig | None = None, seed=0) -> SessionState:
    config = config or ForgeConfig()
    rng = random.Random(derive_seed("rounds", seed))
    return SessionState(target_rounds=rng.randint(config.rounds_min, config.rounds_max), seed=seed)


# --- weights ------------------------------------------------------------------------


def update_pattern_weights(weights: dict, chosen: Pattern) -> dict:
    """Halve the chosen weight and share the removed half equally among the other five."""
    out = dict(weights)
    half = out[chosen] / 2
    out[chosen] = half
    others = [p for p in out if p is not chosen]
    for p in others:
        out[p] += half / len(others)
    return out


def weighted_argmax(candidates: list[str], previous: set[str]) -> str:
    """Uniform weights, +1/4 for items of the previous turn drawn equally from the rest."""
    ordered = sorted(candidates)
    n = len(ordered)
    weights = {c: Fraction(1, n) for c in ordered}
    boosted = [c for c in ordered if c in previous]
    rest = [c for c in ordered if c not in previous]
    if n > 1 and boosted and rest:
        for c in boosted:
            weights[c] += BONUS
        take = BONUS * len(boosted) / len(rest)
        for c in rest:
            weights[c] -= take
        floor = {c: max(w, Fraction(0)) for c, w in weights.items()}
        total = sum(floor.values())
        weights = {c: w / total for c, w in floor.items()}
    best = max(weights.values())
    return next(c for c in ordered if weights[c] == best)


# --- applicability ------------------------------------------------------------------------


def _frame(turn: Turn, schema: GraphSchema):
    try:
        return fr.from_ast(parse(turn.gql), schema)
    except GqlForgeError:
        return None


def _asked(history, schema) -> set[tuple[str, str]]:
    asked = set()
    for t in history:
        ast = parse(t.gql)
        labels = ast.labels()
        for expr in ast.expressions():
            for sub in walk(expr):
                if isinstance(sub, Property) and sub.var in labels:
                    asked.add((labels[sub.var], sub.name))
    return asked


def _traversed(history) -> set[str]:
    return {r for t in history for r in t.relations}


def _has_dated_neighbor(graph: PropertyGraph, node_id: str, relation: str, dated: str) -> bool:
    return any(e.type == relation and graph.nodes[o].type == dated for e, o in graph.neighbors(node_id))


def _neighbors_via(graph: PropertyGraph, node_id: str, relation: str) -> list[str]:
    return sorted({o for e, o in graph.neighbors(node_id) if e.type == relation})


def candidates_for(pattern: Pattern, state: SessionState, schema: GraphSchema, graph: PropertyGraph):
    """Map of entity candidate -> relations usable with it for the pattern, or None if unrealizable."""
    last = state.history[-1]
    scope = sorted(state.entity_set)
    types = state.entity_set
    found: dict[str, list[str]] = {}
    if pattern is Pattern.P1:
        asked = _asked(state.history, schema)
        for e in scope:
            t = types[e]
            if any((t, p) not in asked for p in fr.askable_props(schema, t)):
                found[e] = []
        prev = _frame(last, schema)
        if prev is not None and prev.kind == "prop_dated":
            if any((prev.target, p) not in asked for p in fr.askable_props(schema, prev.target)):
                for e in last.entities:
                    if types.get(e) == prev.anchor_type and graph.display_value(e) == prev.anchor:
                        found.setdefault(e, [])
    elif pattern is Pattern.P2:
        for e in scope:
            rels = [rel for rel, dated in fr.dated_links(schema, types[e]) if _has_dated_neighbor(graph, e, rel, dated)]
            if rels:
                found[e] = rels
    elif pattern is Pattern.P3:
        done = _traversed(state.history)
        for e in scope:
            rels = []
            for et in schema.edges_touching(types[e]):
                other = fr.other_end(schema, et.name, types[e])
                if et.name in done or other == types[e] or fr.bound_property(schema, other) is None:
                    continue
                if _neighbors_via(graph, e, et.name):
                    rels.append(et.name)
            if rels:
                found[e] = rels
    elif pattern is Pattern.P4:
        prev = _frame(last, schema)
        if prev is None:
            return None
        anchors = [e for e in last.entities if graph.display_value(e) == prev.anchor]
        if not anchors:
            return None
        for n in graph.nodes_of_type(types[anchors[0]]):
            if n not in anchors:
                found[n] = []
    elif pattern is Pattern.P5:
        for e in scope:
            rels = []
            for et in schema.edges_touching(types[e]):
                other = fr.other_end(schema, et.name, types[e])
                if other and other != types[e] and fr.numeric_props(schema, other) and _neighbors_via(graph, e, et.name):
                    rels.append(et.name)
            if rels:
                found[e] = rels
    elif pattern is Pattern.P6:
        prev = _frame(last, schema)
        if prev is None or prev.kind not in ("neighbors", "filter") or len(last.answer) < 2:
            return None
        if not fr.numeric_props(schema, prev.target):
            return None
        for e in last.entities:
            if graph.display_value(e) == prev.anchor:
                found[e] = [prev.relation]
    else:
        raise ValueError(pattern)
    return found or None


def applicable_patterns(state: SessionState, schema: GraphSchema, graph: PropertyGraph) -> set[Pattern]:
    if not state.history:
        return set()
    return {p for p in PATTERNS if candidates_for(p, state, schema, graph) is not None}


def select_pattern(state: SessionState, schema: GraphSchema, graph: PropertyGraph) -> tuple[PatternChoice, SessionState]:
    """Argmax weight over applicable patterns (lowest index on ties), then update the weights.

    When no predicate holds, P1 is asked anyway about the last turn's entities.
    """
    if not state.history:
        raise NoApplicablePattern("the opening turn has no expansion pattern")
    options = {p: candidates_for(p, state, schema, graph) for p in PATTERNS}
    applicable = [p for p in PATTERNS if options[p] is not None]
    if applicable:
        best = max(state.pattern_weights[p] for p in applicable)
        chosen = next(p for p in applicable if state.pattern_weights[p] == best)
        found = options[chosen]
    else:
        chosen = Pattern.P1
        ents = [e for e in state.history[-1].entities if fr.askable_props(schema, state.entity_set[e])]
        ents = ents or sorted(e for e in state.entity_set if fr.askable_props(schema, state.entity_set[e]))
        found = {e: [] for e in ents}
    previous = state.history[-1]
    entity = weighted_argmax(list(found), set(previous.entities)) if found else None
    rels = found.get(entity, []) if entity else []
    relation = weighted_argmax(rels, set(previous.relations)) if rels else None
    choice = PatternChoice(chosen, (entity,) if entity else (), (relation,) if relation else ())
    new_state = state.copy()
    new_state.pattern_weights = update_pattern_weights(state.pattern_weights, chosen)
    return choice, new_state


# --- placeholders ------------------------------------------------------------------------

_TOKEN_RE = re.compile("|".join(re.escape(t) for t in PLACEHOLDER_TOKENS))


def _turn_date(turn: Turn | None, schema: GraphSchema) -> str | None:
    if turn is None:
        return None
    try:
        ast = parse(turn.gql)
    except GqlForgeError:
        return None
    for node in ast.node_patterns():
        if node.label and fr.is_dated_type(schema, node.label):
            for key, value in node.props:
                if key == fr.bound_property(schema, node.label) and isinstance(value, Literal):
                    return value.value
    return None


def _pick_date(dates: list[str], pattern: Pattern | None, last_date: str | None, rng: random.Random) -> str:
    dates = sorted(set(dates))
    if last_date is not None:
        if pattern is Pattern.P2:
            day_before = (_dt.date.fromisoformat(last_date) - _dt.timedelta(days=1)).isoformat()
            if day_before in dates:
                return day_before
            earlier = [d for d in dates if d < last_date]
            if earlier:
                return earlier[-1]
            others = [d for d in dates if d != last_date]
            if others:
                return rng.choice(others)
        elif last_date in dates:
            return last_date
    return rng.choice(dates)


def _number_source(text_before: str, schema: GraphSchema) -> str | None:
    low = text_before.lower()
    best, pos = None, -1
    for owner in schema.node_types:
        for p, kind in owner.properties:
            if kind != "number":
                continue
            i = low.rfind(fr.words(p))
            if i > pos:
                best, pos = p, i
    return best


def fulfill_placeholders(template: str, choice: PatternChoice | None, state: SessionState,
                         graph: PropertyGraph, seed, extra_texts: tuple[str, ...] = ()):
    """Replace every placeholder token with a value from the graph.

    Name tokens bind first (chosen entity of the token's type, else a seeded
    sample), then dates from the bound entity's dated neighbours, then numbers
    as the median of the property named just before the token.  Returns the
    filled text, the bindings and the filled ``extra_texts``.
    """
    schema = graph.schema
    tokens = list(dict.fromkeys(_TOKEN_RE.findall(" ".join((template,) + tuple(extra_texts)))))
    rng = random.Random(derive_seed("fill", seed))
    pattern = choice.pattern if choice else None
    bindings: dict[str, object] = {}
    bound_nodes: dict[str, str] = {}
    date_tokens, number_tokens = [], []
    for tok in tokens:
        if tok == "[m]":
            number_tokens.append(tok)
            continue
        nt = schema.type_for_token(tok)
        if nt is None:
            raise UnboundPlaceholder(tok, "no node type uses this token in the schema")
        if fr.is_dated_type(schema, nt.name):
            date_tokens.append((tok, nt.name))
            continue
        node = next((e for e in (choice.entities if choice else ()) if graph.nodes[e].type == nt.name), None)
        if node is None:
            try:
                node = sample_entity(graph, nt.name, derive_seed("sample", seed, tok))
            except EmptyTypeError as exc:
                raise UnboundPlaceholder(tok, f"the graph has no {nt.name} node") from exc
        bound_nodes[tok] = node
        bindings[tok] = graph.display_value(node)
    last = state.history[-1] if state.history else None
    for tok, dated in date_tokens:
        prop = fr.bound_property(schema, dated)
        dates = [graph.nodes[o].props.get(prop)
                 for node in bound_nodes.values() for _, o in graph.neighbors(node)
                 if graph.nodes[o].type == dated]
        dates = [d for d in dates if d is not None]
        if not dates:
            dates = [graph.nodes[n].props.get(prop) for n in graph.nodes_of_type(dated)]
            dates = [d for d in dates if d is not None]
        if not dates:
            raise UnboundPlaceholder(tok, f"no {dated} node carries a {prop}")
        bindings[tok] = _pick_date(dates, pattern, _turn_date(last, schema), rng)
    for tok in number_tokens:
        at = template.find(tok)
        prop = _number_source(template[:at] if at >= 0 else template, schema)
        if prop is None:
            raise UnboundPlaceholder(tok, "no numeric property precedes the number placeholder")
        values = [graph.nodes[o].props.get(prop) for node in bound_nodes.values() for _, o in graph.neighbors(node)]
        values = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
        if not values:
            values = [n.props.get(prop) for n in graph.nodes.values()]
            values = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
        if not values:
            raise UnboundPlaceholder(tok, f"no numeric values for {prop}")
        bindings[tok] = statistics.median_low(values)

    def fill(text: str) -> str:
        return _TOKEN_RE.sub(lambda m: _surface(bindings[m.group(0)]), text)

    return fill(template), bindings, tuple(fill(t) for t in extra_texts)


def _surface(value) -> str:
    if isinstance(value, str):
        return value
    return fr.format_number(value)


# --- turn bookkeeping ------------------------------------------------------------------------


def turn_entities(gql: str, answer_values: list, graph: PropertyGraph) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Node ids named by literals or returned by name, and the edge types traversed."""
    schema = graph.schema
    ast = parse(gql)
    labels = ast.labels()
    ids: set[str] = set()

    def lookup(label, prop, value):
        if label is None or fr.bound_property(schema, label) != prop or fr.is_dated_type(schema, label):
            return
        for n in graph.nodes_of_type(label):
            if graph.nodes[n].props.get(prop) == value:
                ids.add(n)

    for node in ast.node_patterns():
        for key, value in node.props:
            if isinstance(value, Literal):
                lookup(node.label, key, value.value)
    if ast.where is not None:
        for sub in walk(ast.where):
            if hasattr(sub, "op") and sub.op == "=" and hasattr(sub, "left"):
                for p, lit in ((sub.left, sub.right), (sub.right, sub.left)):
                    if isinstance(p, Property) and isinstance(lit, Literal):
                        lookup(labels.get(p.var), p.name, lit.value)
    for i, item in enumerate(ast.returns):
        if isinstance(item.expr, Property):
            for value in answer_values:
                v = value[i] if isinstance(value, (list, tuple)) else value
                lookup(labels.get(item.expr.var), item.expr.name, v)
    rels = tuple(sorted({e.type for e in ast.edge_patterns() if e.type}))
    return tuple(sorted(ids)), rels


def _answer(table) -> tuple:
    return tuple(tuple(v) if isinstance(v, list) else v for v in table.values())


# --- the generation loop -----------------------------------------------------------------------


@dataclass
class Generators:
    question: object
    gql: object
    validator: object  # generator used for reverse and repair prompts
    embedder: object = field(default_factory=TrigramEmbedder)


def _opening_focus(schema: GraphSchema, graph: PropertyGraph, rng: random.Random) -> dict:
    pairs = []
    for t in fr.entity_types(schema):
        if not graph.nodes_of_type(t):
            continue
        pairs += [(t, p) for p in fr.askable_props(schema, t)]
        for _, dated in fr.dated_links(schema, t):
            pairs += [(t, p) for p in fr.askable_props(schema, dated)]
    if not pairs:
        raise UnrenderableError("the schema offers no askable property")
    t, p = rng.choice(sorted(set(pairs)))
    return {"type": t, "prop": p}


def _make_turn(state, choice, schema, graph, gens, quality_cfg, seed, round_no):
    pattern = choice.pattern if choice else None
    types = dict(state.entity_set)
    if choice is not None:
        types.update({e: graph.nodes[e].type for e in choice.entities})
    extras = {"round": round_no, "choice": choice, "entity_types": types}
    if choice is None:
        extras["focus"] = _opening_focus(schema, graph, random.Random(derive_seed("focus", seed)))
    prompt = build_prompt(PromptKind.QUESTION, schema, state.history, pattern, extras=extras)
    out = gens.question.generate(prompt, derive_seed("q", seed))
    complete, bindings, (raw,) = fulfill_placeholders(out.question_complete, choice, state, graph, seed,
                                                      (out.question_raw,))
    gql_prompt = build_prompt(PromptKind.GQL, schema, question=complete, extras={"round": round_no})
    gql = gens.gql.generate(gql_prompt, derive_seed("g", seed)).text.strip()
    outcome = validate_and_optimize(complete, gql, graph, gens.validator, gens.embedder, quality_cfg, seed)
    if not isinstance(outcome, (Accepted, Repaired)):
        return None, outcome.reason
    table = execute(parse(outcome.gql), graph)
    answer = _answer(table)
    entities, relations = turn_entities(outcome.gql, list(answer), graph)
    turn = Turn(round_no, raw, complete, outcome.gql, answer, pattern, entities, relations)
    if pattern is not None and pattern is not Pattern.P4 and not set(entities) & set(state.entity_set):
        return None, "follow-up shares no entity with the dialogue"
    return turn, None


def run_dialogue(session: SessionState, schema: GraphSchema, graph: PropertyGraph, generators: Generators,
                 config: ForgeConfig | None = None, quality_cfg: QualityConfig | None = None,
                 dialogue_id: str = "d00000") -> Dialogue:
    """Generate turns until the target round count; DialogueAbandoned if a round cannot be filled."""
    config = config or ForgeConfig()
    quality_cfg = quality_cfg or QualityConfig()
    state = session.copy()
    while len(state.history) < state.target_rounds:
        round_no = len(state.history) + 1
        choice = None
        if state.history:
            choice, state = select_pattern(state, schema, graph)
        reasons = []
        for attempt in range(config.retry_budget):
            seed = derive_seed(session.seed, round_no, attempt)
            try:
                turn, reason = _make_turn(state, choice, schema, graph, generators, quality_cfg, seed, round_no)
            except (UnboundPlaceholder, UnrenderableError, MalformedResponseError, TransportError) as exc:
                turn, reason = None, f"{type(exc).__name__}: {exc}"
            if turn is not None:
                state.record(turn, graph)
                break
            reasons.append(reason)
        else:
            raise DialogueAbandoned(round_no, reasons)
    meta = {
        "source": "forge",
        "seed": session.seed,
        "schema": schema.fingerprint(),
        "target_rounds": state.target_rounds,
        "patterns": [p.value for p in state.pattern_history],
    }
    return Dialogue(dialogue_id, tuple(state.history), meta)


@dataclass
class BatchResult:
    dialogues: list
    abandoned: list  # (seed, reason)


def generate_dataset(count: int, schema: GraphSchema, graph: PropertyGraph, generators: Generators,
                     config: ForgeConfig | None = None, quality_cfg: QualityConfig | None = None,
                     max_tries_factor: int = 5) -> BatchResult:
    """Forge ``count`` dialogues; abandoned ones are skipped and reported.

    Dialogue i is seeded from (config.seed, i); results are independent of the
    worker count.
    """
    config = config or ForgeConfig()
    done: list[Dialogue] = []
    abandoned: list[tuple[int, str]] = []

    def one(index: int):
        seed = derive_seed("dialogue", config.seed, index)
        session = new_session(schema, graph, config, seed)
        try:
            return run_dialogue(session, schema, graph, generators, config, quality_cfg)
        except DialogueAbandoned as exc:
            return exc

    next_index = 0
    limit = max(count * max_tries_factor, count)
    with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
        while len(done) < count and next_index < limit:
            batch = list(range(next_index, min(limit, next_index + (count - len(done)))))
            next_index = batch[-1] + 1
            for index, result in zip(batch, pool.map(one, batch)):
                if isinstance(result, DialogueAbandoned):
                    abandoned.append((index, str(result)))
                    log.info("dialogue %d abandoned: %s", index, result)
                elif len(done) < count:
                    done.append(replace(result, id=f"d{len(done):05d}"))
    return BatchResult(done, abandoned)
