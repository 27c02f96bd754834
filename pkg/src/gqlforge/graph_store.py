"""Typed in-memory property graph and its schema.

Both are loaded from JSON documents and are immutable once built; every query
executed, generated or evaluated in gqlforge runs against a ``PropertyGraph``.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .errors import ConformanceError, EmptyTypeError, ParseError, SchemaError

VALUE_KINDS = ("string", "number", "boolean", "date")
PLACEHOLDER_TOKENS = ("[s]", "[c]", "[h]", "[t]", "[p]", "[f]", "[i]", "[d]", "[m]")
NUMBER_TOKEN = "[m]"


@dataclass(frozen=True)
class PlaceholderClass:
    token: str
    bound_property: str


@dataclass(frozen=True)
class NodeTypeDef:
    name: str
    properties: tuple[tuple[str, str], ...] = ()
    placeholder: PlaceholderClass | None = None

    def kind_of(self, prop: str) -> str | None:
        for name, kind in self.properties:
            if name == prop:
                return kind
        return None

    @property
    def property_names(self) -> list[str]:
        return [name for name, _ in self.properties]


@dataclass(frozen=True)
class EdgeTypeDef:
    name: str
    source: str
    target: str
    properties: tuple[tuple[str, str], ...] = ()

    def kind_of(self, prop: str) -> str | None:
        for name, kind in self.properties:
            if name == prop:
                return kind
        return None

    @property
    def property_names(self) -> list[str]:
        return [name for name, _ in self.properties]


@dataclass(frozen=True)
class GraphSchema:
    node_types: tuple[NodeTypeDef, ...] = ()
    edge_types: tuple[EdgeTypeDef, ...] = ()

    def __post_init__(self):
        _check_schema(self)

    def node_type(self, name: str) -> NodeTypeDef | None:
        for nt in self.node_types:
            if nt.name == name:
                return nt
        return None

    def edge_type(self, name: str) -> EdgeTypeDef | None:
        for et in self.edge_types:
            if et.name == name:
                return et
        return None

    def type_for_token(self, token: str) -> NodeTypeDef | None:
        for nt in self.node_types:
            if nt.placeholder is not None and nt.placeholder.token == token:
                return nt
        return None

    def edges_touching(self, node_type: str) -> list[EdgeTypeDef]:
        return [et for et in self.edge_types if node_type in (et.source, et.target)]

    def to_dict(self) -> dict:
        def props(items):
            return [{"name": n, "kind": k} for n, k in items]

        nodes = []
        for nt in self.node_types:
            entry: dict[str, Any] = {"name": nt.name, "properties": props(nt.properties)}
            if nt.placeholder is not None:
                entry["placeholder"] = {
                    "token": nt.placeholder.token,
                    "bound_property": nt.placeholder.bound_property,
                }
            nodes.append(entry)
        edges = [
            {"name": et.name, "source": et.source, "target": et.target,
             "properties": props(et.properties)}
            for et in self.edge_types
        ]
        return {"node_types": nodes, "edge_types": edges}

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def describe(self) -> str:
        """Plain-text rendering used inside prompts."""
        lines = []
        for nt in self.node_types:
            props = ", ".join(f"{n}: {k}" for n, k in nt.properties)
            tag = f"  placeholder {nt.placeholder.token}" if nt.placeholder else ""
            lines.append(f"node {nt.name}({props}){tag}")
        for et in self.edge_types:
            props = ", ".join(f"{n}: {k}" for n, k in et.properties)
            lines.append(f"edge {et.name}: {et.source} -> {et.target}({props})")
        return "\n".join(lines)


def _check_props(owner: str, props: Iterable[tuple[str, str]]) -> None:
    seen = set()
    for name, kind in props:
        if not name:
            raise SchemaError(f"{owner}: empty property name")
        if name in seen:
            raise SchemaError(f"{owner}: duplicate property {name!r}")
        if kind not in VALUE_KINDS:
            raise SchemaError(f"{owner}.{name}: unknown value kind {kind!r}")
        seen.add(name)


def _check_schema(schema: GraphSchema) -> None:
    names = set()
    for nt in schema.node_types:
        if not nt.name:
            raise SchemaError("node type with empty name")
        if nt.name in names:
            raise SchemaError(f"duplicate node type {nt.name!r}")
        names.add(nt.name)
        _check_props(nt.name, nt.properties)
        ph = nt.placeholder
        if ph is not None:
            if ph.token not in PLACEHOLDER_TOKENS:
                raise SchemaError(f"{nt.name}: unknown placeholder token {ph.token!r}")
            if ph.token == NUMBER_TOKEN:
                raise SchemaError(f"{nt.name}: {NUMBER_TOKEN} is reserved for numbers")
            if nt.kind_of(ph.bound_property) is None:
                raise SchemaError(
                    f"{nt.name}: placeholder bound to undeclared property {ph.bound_property!r}"
                )
    tokens = [nt.placeholder.token for nt in schema.node_types if nt.placeholder]
    if len(tokens) != len(set(tokens)):
        raise SchemaError("placeholder token used by more than one node type")
    edge_names = set()
    for et in schema.edge_types:
        if not et.name:
            raise SchemaError("edge type with empty name")
        if et.name in edge_names or et.name in names:
            raise SchemaError(f"duplicate type name {et.name!r}")
        edge_names.add(et.name)
        for end in (et.source, et.target):
            if end not in names:
                raise SchemaError(f"edge type {et.name!r} references unknown node type {end!r}")
        _check_props(et.name, et.properties)


def schema_from_dict(doc: Mapping) -> GraphSchema:
    try:
        node_types = []
        for entry in doc.get("node_types", []):
            ph = entry.get("placeholder")
            placeholder = (
                PlaceholderClass(ph["token"], ph["bound_property"]) if ph else None
            )
            props = tuple((p["name"], p["kind"]) for p in entry.get("properties", []))
            node_types.append(NodeTypeDef(entry["name"], props, placeholder))
        edge_types = []
        for entry in doc.get("edge_types", []):
            props = tuple((p["name"], p["kind"]) for p in entry.get("properties", []))
            edge_types.append(
                EdgeTypeDef(entry["name"], entry["source"], entry["target"], props)
            )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed schema document: {exc!r}") from exc
    return GraphSchema(tuple(node_types), tuple(edge_types))


def _read_json(path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc


def load_schema(path) -> GraphSchema:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError("schema document must be a JSON object")
    return schema_from_dict(doc)


# --- graph ------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    id: str
    type: str
    props: Mapping[str, Any]


@dataclass(frozen=True)
class Edge:
    src: str
    type: str
    dst: str
    props: Mapping[str, Any]
    index: int = 0

    @property
    def id(self) -> str:
        return f"{self.src}-[{self.type}]->{self.dst}"


def kind_matches(kind: str, value: Any) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "date":
        if not isinstance(value, str):
            return False
        try:
            _dt.date.fromisoformat(value)
        except ValueError:
            return False
        return len(value) == 10
    return False


@dataclass(frozen=True, eq=False)
class PropertyGraph:
    schema: GraphSchema
    nodes: Mapping[str, Node]
    edges: tuple[Edge, ...]
    _out: Mapping[str, tuple[Edge, ...]] = field(repr=False, default_factory=dict)
    _in: Mapping[str, tuple[Edge, ...]] = field(repr=False, default_factory=dict)
    _by_type: Mapping[str, tuple[str, ...]] = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, schema: GraphSchema, nodes: Iterable[Node], edges: Iterable[Edge]) -> "PropertyGraph":
        node_map: dict[str, Node] = {}
        for node in nodes:
            if node.id in node_map:
                raise ConformanceError(node.id, "duplicate node id")
            node_map[node.id] = Node(node.id, node.type, MappingProxyType(dict(node.props)))
        edge_list = tuple(
            Edge(e.src, e.type, e.dst, MappingProxyType(dict(e.props)), i)
            for i, e in enumerate(edges)
        )
        out: dict[str, list[Edge]] = {nid: [] for nid in node_map}
        inc: dict[str, list[Edge]] = {nid: [] for nid in node_map}
        by_type: dict[str, list[str]] = {}
        for nid in sorted(node_map):
            by_type.setdefault(node_map[nid].type, []).append(nid)
        graph = cls(
            schema, MappingProxyType(node_map), edge_list,
            MappingProxyType({}), MappingProxyType({}),
            MappingProxyType({k: tuple(v) for k, v in by_type.items()}),
        )
        violations = conformance_violations(graph)
        if violations:
            item, rule = violations[0]
            raise ConformanceError(item, rule)
        for e in edge_list:
            out[e.src].append(e)
            inc[e.dst].append(e)
        object.__setattr__(graph, "_out", MappingProxyType({k: tuple(v) for k, v in out.items()}))
        object.__setattr__(graph, "_in", MappingProxyType({k: tuple(v) for k, v in inc.items()}))
        return graph

    def nodes_of_type(self, node_type: str) -> tuple[str, ...]:
        return self._by_type.get(node_type, ())

    def out_edges(self, node_id: str) -> tuple[Edge, ...]:
        return self._out.get(node_id, ())

    def in_edges(self, node_id: str) -> tuple[Edge, ...]:
        return self._in.get(node_id, ())

    def neighbors(self, node_id: str) -> list[tuple[Edge, str]]:
        """(edge, other endpoint) pairs in both directions."""
        pairs = [(e, e.dst) for e in self.out_edges(node_id)]
        pairs += [(e, e.src) for e in self.in_edges(node_id)]
        return pairs

    def display_value(self, node_id: str) -> Any:
        """The value a placeholder for this node would be filled with."""
        node = self.nodes[node_id]
        nt = self.schema.node_type(node.type)
        if nt is not None and nt.placeholder is not None:
            return node.props.get(nt.placeholder.bound_property)
        return node_id

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "type": n.type, "props": dict(n.props)} for n in self.nodes.values()],
            "edges": [{"src": e.src, "type": e.type, "dst": e.dst, "props": dict(e.props)} for e in self.edges],
        }

    def __eq__(self, other):
        if not isinstance(other, PropertyGraph):
            return NotImplemented
        return self.schema == other.schema and self.to_dict() == other.to_dict()


def _check_props_of(item_id: str, declared, props: Mapping[str, Any]) -> list[tuple[str, str]]:
    found = []
    kinds = dict(declared)
    for key, value in props.items():
        if key not in kinds:
            found.append((item_id, f"undeclared property {key!r}"))
        elif value is not None and not kind_matches(kinds[key], value):
            found.append((item_id, f"property {key!r} is not a {kinds[key]}: {value!r}"))
    return found


def conformance_violations(graph: PropertyGraph) -> list[tuple[str, str]]:
    """Every (item id, rule) violated by the graph; empty for a conforming graph."""
    schema = graph.schema
    found: list[tuple[str, str]] = []
    for node in graph.nodes.values():
        nt = schema.node_type(node.type)
        if nt is None:
            found.append((node.id, f"unknown node type {node.type!r}"))
            continue
        found += _check_props_of(node.id, nt.properties, node.props)
    for e in graph.edges:
        et = schema.edge_type(e.type)
        if et is None:
            found.append((e.id, f"unknown edge type {e.type!r}"))
            continue
        for end, want in ((e.src, et.source), (e.dst, et.target)):
            if end not in graph.nodes:
                found.append((e.id, f"endpoint {end!r} does not exist"))
            elif graph.nodes[end].type != want:
                found.append((e.id, f"endpoint {end!r} is a {graph.nodes[end].type}, expected {want}"))
        found += _check_props_of(e.id, et.properties, e.props)
    return found


def graph_from_dict(schema: GraphSchema, doc: Mapping) -> PropertyGraph:
    try:
        nodes = [Node(str(n["id"]), n["type"], n.get("props", {})) for n in doc.get("nodes", [])]
        edges = [
            Edge(str(e["src"]), e["type"], str(e["dst"]), e.get("props", {}))
            for e in doc.get("edges", [])
        ]
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed graph document: {exc!r}") from exc
    return PropertyGraph.build(schema, nodes, edges)


def load_graph(schema: GraphSchema, path) -> PropertyGraph:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError("graph document must be a JSON object")
    return graph_from_dict(schema, doc)


def sample_entity(graph: PropertyGraph, node_type: str, seed) -> str:
    """Pick one node id of ``node_type``; deterministic in (graph, type, seed)."""
    candidates = graph.nodes_of_type(node_type)
    if not candidates:
        raise EmptyTypeError(f"no node of type {node_type!r}")
    return random.Random(f"{node_type}:{seed}").choice(candidates)
