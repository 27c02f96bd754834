"""Controlled-language question frames.

A frame is the small structured meaning behind every template question the
mock generators speak.  It renders to text, compiles to a query, and can be
recovered both from its own text and from the query it compiled to, so the
mock question, GQL and reverse generators agree with each other exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from ..graph_store import GraphSchema, PropertyGraph
from ..gql.ast import (
    Aggregate,
    Comparison,
    Literal,
    Placeholder,
    Property,
    QueryAst,
    Variable,
)

AGG_WORDS = {"AVG": "average", "SUM": "total", "MAX": "maximum", "MIN": "minimum"}
_WORD_AGGS = {v: k for k, v in AGG_WORDS.items()}

KINDS = ("prop", "prop_dated", "neighbors", "filter", "top", "agg", "count")


def words(name: str) -> str:
    return name.replace("_", " ")


def format_number(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return repr(value)
    return str(value)


def parse_number(text: str):
    return float(text) if any(c in text for c in ".eE") else int(text)


@dataclass(frozen=True)
class Frame:
    kind: str
    anchor_type: str
    anchor: str  # entity value or a placeholder token
    prop: str | None = None
    target: str | None = None  # neighbour type
    relation: str | None = None
    date: str | None = None
    agg: str | None = None  # AVG/SUM/MAX/MIN
    highest: bool = True
    number: object = None

    def with_anchor(self, anchor: str) -> "Frame":
        return replace(self, anchor=anchor)


# --- lexicon ------------------------------------------------------------------


@dataclass(frozen=True)
class Lexicon:
    """Entity surface forms drawn from the graph: value -> (type, node ids)."""

    entries: dict
    dates: tuple[str, ...] = ()

    @classmethod
    def from_graph(cls, graph: PropertyGraph) -> "Lexicon":
        entries: dict[str, tuple[str, list[str]]] = {}
        dates = set()
        for node in sorted(graph.nodes.values(), key=lambda n: n.id):
            nt = graph.schema.node_type(node.type)
            if nt is None or nt.placeholder is None:
                continue
            value = node.props.get(nt.placeholder.bound_property)
            if value is None:
                continue
            if nt.kind_of(nt.placeholder.bound_property) == "date":
                dates.add(value)
                continue
            entries.setdefault(str(value), (node.type, []))[1].append(node.id)
        return cls({k: (t, tuple(ids)) for k, (t, ids) in entries.items()}, tuple(sorted(dates)))

    def type_of(self, value: str) -> str | None:
        hit = self.entries.get(value)
        return hit[0] if hit else None

    def nodes_of(self, value: str) -> tuple[str, ...]:
        hit = self.entries.get(value)
        return hit[1] if hit else ()

    @property
    def latest_date(self) -> str | None:
        return self.dates[-1] if self.dates else None

    def find_mentions(self, text: str) -> list[str]:
        """Entity names occurring in text as whole words, longest first."""
        low = text.lower()
        found = []
        for name in sorted(self.entries, key=lambda s: (-len(s), s)):
            if re.search(r"(?<!\w)" + re.escape(name.lower()) + r"(?!\w)", low):
                if not any(name.lower() in other.lower() for other in found):
                    found.append(name)
        return found

    def fuzzy(self, fragment: str) -> str | None:
        """Best entity whose name starts with or contains the fragment."""
        frag = fragment.strip().lower()
        if not frag:
            return None
        if fragment in self.entries:
            return fragment
        ranked = []
        for name in self.entries:
            low = name.lower()
            if low.startswith(frag):
                ranked.append((0, len(name), name))
            elif frag in low:
                ranked.append((1, len(name), name))
        return min(ranked)[2] if ranked else None


# --- schema helpers ---------------------------------------------------------------


def bound_property(schema: GraphSchema, type_name: str) -> str | None:
    nt = schema.node_type(type_name)
    return nt.placeholder.bound_property if nt and nt.placeholder else None


def token_of(schema: GraphSchema, type_name: str) -> str | None:
    nt = schema.node_type(type_name)
    return nt.placeholder.token if nt and nt.placeholder else None


def is_dated_type(schema: GraphSchema, type_name: str) -> bool:
    nt = schema.node_type(type_name)
    return bool(nt and nt.placeholder and nt.kind_of(nt.placeholder.bound_property) == "date")


def entity_types(schema: GraphSchema) -> list[str]:
    """Types whose nodes are named entities (non-date placeholder)."""
    return [nt.name for nt in schema.node_types if nt.placeholder and not is_dated_type(schema, nt.name)]


def other_end(schema: GraphSchema, relation: str, type_name: str) -> str | None:
    et = schema.edge_type(relation)
    if et is None:
        return None
    if et.source == type_name:
        return et.target
    if et.target == type_name:
        return et.source
    return None


def dated_links(schema: GraphSchema, type_name: str) -> list[tuple[str, str]]:
    """(relation, dated type) pairs reachable in one hop from ``type_name``."""
    out = []
    for et in schema.edges_touching(type_name):
        other = other_end(schema, et.name, type_name)
        if other and other != type_name and is_dated_type(schema, other):
            out.append((et.name, other))
    return out


def numeric_props(schema: GraphSchema, type_name: str) -> list[str]:
    nt = schema.node_type(type_name)
    return [p for p, k in nt.properties if k == "number"] if nt else []


def askable_props(schema: GraphSchema, type_name: str) -> list[str]:
    """Properties a question may ask for: not the naming property, not boolean."""
    nt = schema.node_type(type_name)
    if nt is None:
        return []
    skip = nt.placeholder.bound_property if nt.placeholder else None
    return [p for p, k in nt.properties if p != skip and k != "boolean"]


# --- rendering --------------------------------------------------------------------


def render(frame: Frame) -> str:
    f = frame
    p = words(f.prop) if f.prop else ""
    t = words(f.target) if f.target else ""
    r = words(f.relation) if f.relation else ""
    if f.kind == "prop":
        return f"What is the {p} of {f.anchor}?"
    if f.kind == "prop_dated":
        return f"What is the {p} of {f.anchor} on {f.date}?"
    if f.kind == "neighbors":
        return f"Which {t} records are linked to {f.anchor} through {r}?"
    if f.kind == "filter":
        return f"Which {t} records linked to {f.anchor} through {r} have {p} of at least {_num_text(f.number)}?"
    if f.kind == "top":
        side = "highest" if f.highest else "lowest"
        return f"Which {t} record linked to {f.anchor} through {r} has the {side} {p}?"
    if f.kind == "agg":
        return f"What is the {AGG_WORDS[f.agg]} {p} of the {t} records linked to {f.anchor} through {r}?"
    if f.kind == "count":
        return f"How many {t} records are linked to {f.anchor} through {r}?"
    raise ValueError(f"unknown frame kind {f.kind!r}")


def _num_text(value) -> str:
    return value if isinstance(value, str) else format_number(value)


# --- compiling to a query ------------------------------------------------------------


def _lit(value) -> str:
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"
    return format_number(value)


def _hop(schema: GraphSchema, f: Frame, target_props: str = "") -> str:
    anchor_prop = bound_property(schema, f.anchor_type)
    left = f"(v1:{f.anchor_type} {{{anchor_prop}: {_lit(f.anchor)}}})"
    right = f"(v2:{f.target}{target_props})"
    et = schema.edge_type(f.relation)
    if et is not None and et.source == f.anchor_type:
        return f"MATCH {left}-[:{f.relation}]->{right}"
    return f"MATCH {left}<-[:{f.relation}]-{right}"


def to_gql(frame: Frame, schema: GraphSchema) -> str:
    f = frame
    if f.kind == "prop":
        anchor_prop = bound_property(schema, f.anchor_type)
        return f"MATCH (v1:{f.anchor_type} {{{anchor_prop}: {_lit(f.anchor)}}}) RETURN v1.{f.prop}"
    if f.kind == "prop_dated":
        date_prop = bound_property(schema, f.target)
        return _hop(schema, f, f" {{{date_prop}: {_lit(f.date)}}}") + f" RETURN v2.{f.prop}"
    target_name = bound_property(schema, f.target)
    if f.kind == "neighbors":
        return _hop(schema, f) + f" RETURN v2.{target_name}"
    if f.kind == "filter":
        return _hop(schema, f) + f" WHERE v2.{f.prop} >= {_lit(f.number)} RETURN v2.{target_name}"
    if f.kind == "top":
        order = "DESC" if f.highest else "ASC"
        return _hop(schema, f) + f" RETURN v2.{target_name} ORDER BY v2.{f.prop} {order} LIMIT 1"
    if f.kind == "agg":
        return _hop(schema, f) + f" RETURN {f.agg}(v2.{f.prop})"
    if f.kind == "count":
        return _hop(schema, f) + " RETURN COUNT(v2)"
    raise ValueError(f"unknown frame kind {f.kind!r}")


# --- recovering a frame from a query ---------------------------------------------------


def _literal_value(value):
    if isinstance(value, Literal):
        return value.value
    if isinstance(value, Placeholder):
        return value.token
    return None


def from_ast(ast: QueryAst, schema: GraphSchema) -> Frame | None:
    """The frame a query was compiled from, or None for any other shape."""
    if len(ast.paths) != 1 or ast.distinct or len(ast.returns) != 1:
        return None
    path = ast.paths[0]
    if len(path.edges) > 1:
        return None
    first = path.nodes[0]
    if len(first.props) != 1 or first.label is None:
        return None
    anchor_key, anchor_val = first.props[0]
    if anchor_key != bound_property(schema, first.label):
        return None
    anchor = _literal_value(anchor_val)
    if not isinstance(anchor, str):
        return None
    ret = ast.returns[0].expr
    base = dict(anchor_type=first.label, anchor=anchor)
    if not path.edges:
        if ast.where is None and not ast.order_by and ast.limit is None and isinstance(ret, Property) \
                and ret.var == first.var:
            return Frame("prop", prop=ret.name, **base)
        return None
    edge, second = path.edges[0], path.nodes[1]
    if edge.type is None or second.label is None or edge.var is not None:
        return None
    et = schema.edge_type(edge.type)
    if et is None:
        return None
    want_dir = "right" if et.source == first.label else "left"
    if edge.direction != want_dir:
        return None
    base.update(target=second.label, relation=edge.type)
    v2 = second.var
    if second.props:
        if len(second.props) != 1 or ast.where is not None or ast.order_by or ast.limit is not None:
            return None
        key, val = second.props[0]
        date = _literal_value(val)
        if key != bound_property(schema, second.label) or not isinstance(date, str):
            return None
        if isinstance(ret, Property) and ret.var == v2:
            return Frame("prop_dated", prop=ret.name, date=date, **base)
        return None
    target_name = bound_property(schema, second.label)
    returns_name = isinstance(ret, Property) and ret.var == v2 and ret.name == target_name
    if ast.where is None and not ast.order_by and ast.limit is None:
        if returns_name:
            return Frame("neighbors", **base)
        if isinstance(ret, Aggregate) and not ret.distinct:
            if ret.func == "COUNT" and isinstance(ret.arg, Variable) and ret.arg.name == v2:
                return Frame("count", **base)
            if ret.func in AGG_WORDS and isinstance(ret.arg, Property) and ret.arg.var == v2:
                return Frame("agg", prop=ret.arg.name, agg=ret.func, **base)
        return None
    if not returns_name:
        return None
    w = ast.where
    if w is not None and not ast.order_by and ast.limit is None:
        if isinstance(w, Comparison) and w.op == ">=" and isinstance(w.left, Property) and w.left.var == v2:
            number = _literal_value(w.right)
            if number is not None and not isinstance(number, bool):
                return Frame("filter", prop=w.left.name, number=number, **base)
        return None
    if w is None and len(ast.order_by) == 1 and ast.limit == 1:
        key = ast.order_by[0]
        if isinstance(key.expr, Property) and key.expr.var == v2:
            return Frame("top", prop=key.expr.name, highest=key.descending, **base)
    return None


# --- recovering a frame from its text ---------------------------------------------------

_NUM = r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?|\[m\]"
_PATTERNS = [
    ("prop_dated", re.compile(r"^What is the (?P<p>[\w ]+?) of (?P<e>.+) on (?P<d>\d{4}-\d{2}-\d{2}|\[d\])\?$")),
    ("agg", re.compile(r"^What is the (?P<a>average|total|maximum|minimum) (?P<p>[\w ]+?) of the (?P<t>[\w ]+?) "
                       r"records linked to (?P<e>.+) through (?P<r>[\w ]+)\?$")),
    ("prop", re.compile(r"^What is the (?P<p>[\w ]+?) of (?P<e>.+)\?$")),
    ("neighbors", re.compile(r"^Which (?P<t>[\w ]+?) records are linked to (?P<e>.+) through (?P<r>[\w ]+)\?$")),
    ("filter", re.compile(r"^Which (?P<t>[\w ]+?) records linked to (?P<e>.+) through (?P<r>[\w ]+) "
                          rf"have (?P<p>[\w ]+?) of at least (?P<n>{_NUM})\?$")),
    ("top", re.compile(r"^Which (?P<t>[\w ]+?) record linked to (?P<e>.+) through (?P<r>[\w ]+) "
                       r"has the (?P<s>highest|lowest) (?P<p>[\w ]+)\?$")),
    ("count", re.compile(r"^How many (?P<t>[\w ]+?) records are linked to (?P<e>.+) through (?P<r>[\w ]+)\?$")),
]


def _name_index(schema: GraphSchema) -> tuple[dict, dict, dict]:
    types = {words(nt.name).lower(): nt.name for nt in schema.node_types}
    rels = {words(et.name).lower(): et.name for et in schema.edge_types}
    props = {}
    for owner in list(schema.node_types) + list(schema.edge_types):
        for p, _ in owner.properties:
            props.setdefault(words(p).lower(), p)
    return types, rels, props


def _anchor_type_for_prop(schema: GraphSchema, prop: str, lexicon: Lexicon | None, anchor: str) -> str | None:
    if lexicon is not None:
        t = lexicon.type_of(anchor)
        if t is not None:
            return t
    tok_type = schema.type_for_token(anchor) if anchor.startswith("[") else None
    if tok_type is not None:
        return tok_type.name
    for name in entity_types(schema):
        if prop in askable_props(schema, name):
            return name
    return None


def parse_question(text: str, schema: GraphSchema, lexicon: Lexicon | None = None) -> Frame | None:
    """Recover the frame of a template question; None if the text is free-form."""
    text = " ".join(text.split())
    types, rels, props = _name_index(schema)
    for kind, rx in _PATTERNS:
        m = rx.match(text)
        if not m:
            continue
        g = m.groupdict()
        anchor = g["e"]
        prop = props.get(g["p"].lower()) if g.get("p") else None
        if g.get("p") and prop is None:
            continue
        if kind == "prop":
            anchor_type = _anchor_type_for_prop(schema, prop, lexicon, anchor)
            if anchor_type is None or prop not in askable_props(schema, anchor_type):
                continue
            return Frame("prop", anchor_type, anchor, prop=prop)
        if kind == "prop_dated":
            anchor_type = None
            if lexicon is not None:
                anchor_type = lexicon.type_of(anchor)
            if anchor_type is None:
                tok = schema.type_for_token(anchor)
                anchor_type = tok.name if tok else None
            candidates = [anchor_type] if anchor_type else entity_types(schema)
            for at in candidates:
                for rel, dt in dated_links(schema, at):
                    if prop in askable_props(schema, dt):
                        return Frame("prop_dated", at, anchor, prop=prop, target=dt, relation=rel, date=g["d"])
            continue
        target = types.get(g["t"].lower())
        relation = rels.get(g["r"].lower())
        if target is None or relation is None:
            continue
        anchor_type = other_end(schema, relation, target)
        if anchor_type is None:
            continue
        base = dict(kind=kind, anchor_type=anchor_type, anchor=anchor, target=target, relation=relation)
        if kind == "neighbors" or kind == "count":
            return Frame(**base)
        if kind == "filter":
            n = g["n"]
            return Frame(**base, prop=prop, number=n if n == "[m]" else parse_number(n))
        if kind == "top":
            return Frame(**base, prop=prop, highest=g["s"] == "highest")
        if kind == "agg":
            return Frame(**base, prop=prop, agg=_WORD_AGGS[g["a"]])
    return None
