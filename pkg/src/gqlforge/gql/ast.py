"""Immutable syntax tree for the MATCH-form query subset.

Nodes are frozen dataclasses, so ``==`` is structural equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Union

AGGREGATES = ("COUNT", "SUM", "AVG", "MAX", "MIN", "COLLECT")
COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")


def literal_kind(value: Any) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    if value is None:
        return "null"
    raise TypeError(f"unsupported literal {value!r}")


@dataclass(frozen=True)
class Literal:
    value: Any
    # Kept explicitly so that 1, 1.0 and TRUE stay structurally distinct.
    kind: str = field(default="")

    def __post_init__(self):
        if not self.kind:
            object.__setattr__(self, "kind", literal_kind(self.value))


@dataclass(frozen=True)
class Placeholder:
    token: str  # e.g. "[m]"


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Property:
    var: str
    name: str


@dataclass(frozen=True)
class Aggregate:
    func: str
    arg: "Expr | None"  # None means COUNT(*)
    distinct: bool = False


@dataclass(frozen=True)
class Comparison:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR | XOR
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Literal, Placeholder, Variable, Property, Aggregate, Comparison, BoolOp, Not]
MapValue = Union[Literal, Placeholder]


@dataclass(frozen=True)
class NodePattern:
    var: str | None = None
    label: str | None = None
    props: tuple[tuple[str, MapValue], ...] = ()


@dataclass(frozen=True)
class EdgePattern:
    var: str | None = None
    type: str | None = None
    direction: str = "right"  # right: (a)-[]->(b); left: (a)<-[]-(b)


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple[NodePattern, ...]
    edges: tuple[EdgePattern, ...] = ()

    def __post_init__(self):
        if len(self.nodes) != len(self.edges) + 1:
            raise ValueError("a path alternates nodes and edges, starting and ending on a node")


@dataclass(frozen=True)
class ReturnItem:
    expr: Expr

    @property
    def aggregate(self) -> str | None:
        for sub in walk(self.expr):
            if isinstance(sub, Aggregate):
                return sub.func
        return None


@dataclass(frozen=True)
class SortKey:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class QueryAst:
    paths: tuple[PathPattern, ...]
    returns: tuple[ReturnItem, ...]
    where: Expr | None = None
    distinct: bool = False
    order_by: tuple[SortKey, ...] = ()
    limit: int | None = None

    def node_patterns(self) -> Iterator[NodePattern]:
        for path in self.paths:
            yield from path.nodes

    def edge_patterns(self) -> Iterator[EdgePattern]:
        for path in self.paths:
            yield from path.edges

    def labels(self) -> dict[str, str]:
        """Variable -> label for every labelled node and typed edge variable."""
        found: dict[str, str] = {}
        for path in self.paths:
            for node in path.nodes:
                if node.var and node.label and node.var not in found:
                    found[node.var] = node.label
            for edge in path.edges:
                if edge.var and edge.type and edge.var not in found:
                    found[edge.var] = edge.type
        return found

    def edge_vars(self) -> set[str]:
        return {e.var for e in self.edge_patterns() if e.var}

    def expressions(self) -> Iterator[Expr]:
        if self.where is not None:
            yield self.where
        for item in self.returns:
            yield item.expr
        for key in self.order_by:
            yield key.expr


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    yield expr
    if isinstance(expr, Aggregate):
        if expr.arg is not None:
            yield from walk(expr.arg)
    elif isinstance(expr, (Comparison, BoolOp)):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Not):
        yield from walk(expr.operand)


def referenced_vars(expr: Expr) -> list[str]:
    names = []
    for sub in walk(expr):
        if isinstance(sub, Variable):
            names.append(sub.name)
        elif isinstance(sub, Property):
            names.append(sub.var)
    return names


def has_aggregate(expr: Expr) -> bool:
    return any(isinstance(sub, Aggregate) for sub in walk(expr))
