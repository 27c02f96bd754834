"""Dependency-aware inference: reformulate, narrow the schema, generate, check, refine once."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .dialogue import Dialogue
from .errors import (
    GqlForgeError,
    InferenceError,
    MalformedResponseError,
    ReformulationError,
    TransportError,
)
from .evaluation import PredictionSet
from .gql import execute, parse
from .gql.ast import Aggregate, Literal, Property, walk
from .graph_store import GraphSchema
from .quality import TrigramEmbedder, cosine
from .text_gen import frames as fr
from .text_gen.prompts import PromptKind, build_prompt


@dataclass(frozen=True)
class ContextTurn:
    question: str
    gql: str
    answer: tuple
    entities: tuple[str, ...]
    relations: tuple[str, ...]


@dataclass(frozen=True)
class StructuredContext:
    turns: tuple[ContextTurn, ...] = ()

    @property
    def entities(self) -> set[str]:
        return {e for t in self.turns for e in t.entities}

    @property
    def relations(self) -> set[str]:
        return {r for t in self.turns for r in t.relations}

    def render(self) -> str:
        if not self.turns:
            return "(empty)"
        lines = []
        for i, t in enumerate(self.turns, 1):
            lines.append(f"Round {i}")
            lines.append(f"Question: {t.question}")
            lines.append(f"GQL: {t.gql}")
            lines.append(f"Answer: {list(t.answer)}")
        return "\n".join(lines)


def analyze(gql: str, answer) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Entities (node labels and literal values) and relations (edge types) of a query."""
    try:
        ast = parse(gql)
    except GqlForgeError:
        return (), ()
    ents = []
    for node in ast.node_patterns():
        if node.label:
            ents.append(node.label)
        ents += [str(v.value) for _, v in node.props if isinstance(v, Literal)]
    if ast.where is not None:
        ents += [str(s.value) for s in walk(ast.where) if isinstance(s, Literal) and s.kind == "string"]
    ents += [a for a in answer if isinstance(a, str)]
    rels = [e.type for e in ast.edge_patterns() if e.type]
    return tuple(dict.fromkeys(ents)), tuple(dict.fromkeys(rels))


def record(context: StructuredContext, question: str, gql: str, answer) -> StructuredContext:
    entities, relations = analyze(gql, answer)
    turn = ContextTurn(question, gql, tuple(answer), entities, relations)
    return StructuredContext(context.turns + (turn,))


def reformulate(question: str, context: StructuredContext, generator, schema: GraphSchema, seed=0) -> str:
    prompt = build_prompt(PromptKind.REFORMULATE, schema, question=question, context=context.render(),
                          extras={"structured_context": context})
    try:
        text = generator.generate(prompt, seed).text.strip()
    except (TransportError, MalformedResponseError) as exc:
        raise ReformulationError(f"reformulation failed: {exc}") from exc
    if not text:
        raise ReformulationError("reformulation returned nothing")
    if re.search(r"\[[a-z]\]", text):
        raise ReformulationError(f"reformulated question still has a placeholder: {text!r}")
    return text


# --- sub-schema -------------------------------------------------------------------------


def _mentions(question: str, name: str) -> bool:
    folded = " ".join(question.lower().replace("_", " ").split())
    return re.search(r"(?<!\w)" + re.escape(name.lower().replace("_", " ")) + r"(?!\w)", folded) is not None


def extract_subschema(schema: GraphSchema, context: StructuredContext, question: str) -> GraphSchema:
    """Types named in context or matched in the question, closed under edge endpoints.

    A node type left without any edge gets its incident edge types, so a lone
    type still shows how it connects; an empty selection means the full schema.
    """
    node_names = {nt.name for nt in schema.node_types}
    edge_names = {et.name for et in schema.edge_types}
    nodes: set[str] = set()
    edges: set[str] = set()
    for t in context.turns:
        nodes |= {e for e in t.entities if e in node_names}
        edges |= {r for r in t.relations if r in edge_names}
    for nt in schema.node_types:
        if _mentions(question, nt.name) or any(_mentions(question, p) for p in nt.property_names):
            nodes.add(nt.name)
    for et in schema.edge_types:
        if _mentions(question, et.name) or any(_mentions(question, p) for p in et.property_names):
            edges.add(et.name)
    if not nodes and not edges:
        return schema
    edges |= {et.name for et in schema.edge_types if et.source in nodes and et.target in nodes}
    for name in sorted(nodes):
        if not any(schema.edge_type(e).source == name or schema.edge_type(e).target == name for e in edges):
            edges |= {et.name for et in schema.edges_touching(name)}
    for e in edges:
        et = schema.edge_type(e)
        nodes |= {et.source, et.target}
    return GraphSchema(
        tuple(nt for nt in schema.node_types if nt.name in nodes),
        tuple(et for et in schema.edge_types if et.name in edges),
    )


# --- alignment and inference -------------------------------------------------------------


def asked_property(question: str, schema: GraphSchema) -> str | None:
    props = sorted({p for owner in list(schema.node_types) + list(schema.edge_types) for p in owner.property_names},
                   key=lambda p: -len(p))
    for p in props:
        if _mentions(question, p):
            return p
    return None


def _projected(ast) -> set[str]:
    out = set()
    for item in ast.returns:
        out |= {s.name for s in walk(item.expr) if isinstance(s, Property)}
        if isinstance(item.expr, Aggregate) and item.expr.arg is None:
            out.add("*")
    for key in ast.order_by:
        out |= {s.name for s in walk(key.expr) if isinstance(s, Property)}
    if ast.where is not None:
        out |= {s.name for s in walk(ast.where) if isinstance(s, Property)}
    return out


def is_aligned_shape(question: str, gql: str, graph) -> tuple[bool, str]:
    """Offline alignment: the query runs, returns data, and touches the asked property."""
    try:
        ast = parse(gql)
        table = execute(ast, graph)
    except GqlForgeError as exc:
        return False, f"misaligned: query failed: {exc}"
    if not any(v is not None for row in table.rows for v in row):
        return False, "misaligned: empty result"
    wanted = asked_property(question, graph.schema)
    if wanted is not None and wanted not in _projected(ast):
        return False, f"misaligned: the question asks for {wanted}"
    return True, ""


@dataclass
class InferenceConfig:
    alignment: str = "shape"  # or "reverse"
    tau_sem: float = 0.8


@dataclass
class InferenceTrace:
    explicit_question: str = ""
    subschema: tuple[str, ...] = ()
    candidate: str = ""
    aligned: bool = False
    reason: str = ""
    align_checks: int = 0
    refines: int = 0
    executable: bool = False


def _check(question, gql, graph, generator, config, embedder, seed) -> tuple[bool, str]:
    if config.alignment == "shape":
        return is_aligned_shape(question, gql, graph)
    ok, reason = is_aligned_shape(question, gql, graph)
    if not ok and reason.startswith("misaligned: query failed"):
        return ok, reason
    prompt = build_prompt(PromptKind.REVERSE, graph.schema, gql=gql)
    inferred = generator.generate(prompt, f"{seed}:reverse").text
    sim = cosine(embedder.embed(inferred), embedder.embed(question))
    if sim >= config.tau_sem:
        return True, ""
    return False, f"misaligned: reverse-generated question has similarity {sim:.3f}"


def infer_turn(question: str, context: StructuredContext, graph, schema: GraphSchema, generator,
               config: InferenceConfig | None = None, seed=0, embedder=None) -> tuple[str, InferenceTrace]:
    """One turn of the dependency-aware method; returns the final query and a trace."""
    config = config or InferenceConfig()
    embedder = embedder or TrigramEmbedder()
    trace = InferenceTrace()
    try:
        explicit = reformulate(question, context, generator, schema, seed)
        trace.explicit_question = explicit
        sub = extract_subschema(schema, context, explicit)
        trace.subschema = tuple(nt.name for nt in sub.node_types) + tuple(et.name for et in sub.edge_types)
        prompt = build_prompt(PromptKind.GQL, sub, question=explicit)
        gql = generator.generate(prompt, f"{seed}:gql").text.strip()
        trace.candidate = gql
        trace.align_checks += 1
        ok, reason = _check(explicit, gql, graph, generator, config, embedder, seed)
        trace.aligned, trace.reason = ok, reason
        if not ok:
            trace.refines += 1
            repair = build_prompt(PromptKind.REPAIR, schema, question=explicit, gql=gql, error=reason)
            gql = generator.generate(repair, f"{seed}:refine").text.strip()
    except ReformulationError as exc:
        raise InferenceError(str(exc)) from exc
    except (TransportError, MalformedResponseError) as exc:
        raise InferenceError(f"generator failed: {exc}") from exc
    try:
        execute(parse(gql), graph)
        trace.executable = True
    except GqlForgeError:
        trace.executable = False
    return gql, trace


def infer_dialogue(questions, graph, schema, generator, config=None, seed=0):
    """Run every turn in order, feeding each answer back into the context."""
    context = StructuredContext()
    out = []
    for i, q in enumerate(questions, 1):
        gql, trace = infer_turn(q, context, graph, schema, generator, config, f"{seed}:{i}")
        try:
            answer = tuple(execute(parse(gql), graph).values())
        except GqlForgeError:
            answer = ()
        context = record(context, trace.explicit_question or q, gql, answer)
        out.append((gql, trace))
    return out


def infer_dataset(dataset: list[Dialogue], graph, generator, config=None, seed=0) -> PredictionSet:
    preds = PredictionSet()
    for d in dataset:
        results = infer_dialogue([t.question_raw for t in d.turns], graph, graph.schema, generator, config,
                                 f"{seed}:{d.id}")
        for t, (gql, _) in zip(d.turns, results):
            preds.add(d.id, t.round, gql)
    return preds
