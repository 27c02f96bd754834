"""Query analytics: entity masking, keyword counting and query-type classification."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum

from ..graph_store import NUMBER_TOKEN, GraphSchema
from .ast import (
    Aggregate,
    BoolOp,
    Comparison,
    Expr,
    Literal,
    NodePattern,
    Not,
    PathPattern,
    Placeholder,
    Property,
    QueryAst,
    ReturnItem,
    SortKey,
    Variable,
    walk,
)
from .lexer import tokenize
from .printer import print_canonical

# --- masking ----------------------------------------------------------------


def _bound_token(schema: GraphSchema, label: str | None, prop: str) -> str | None:
    if label is None:
        return None
    nt = schema.node_type(label)
    if nt is None or nt.placeholder is None or nt.placeholder.bound_property != prop:
        return None
    return nt.placeholder.token


def _mask_literal(value, token: str | None):
    if token is not None and isinstance(value, (Literal, Placeholder)):
        return Literal(token)
    if isinstance(value, Literal) and value.kind in ("int", "float"):
        return Placeholder(NUMBER_TOKEN)
    return value


def _mask_expr(expr: Expr, labels: dict[str, str], schema: GraphSchema) -> Expr:
    if isinstance(expr, Comparison):
        left, right = expr.left, expr.right
        if expr.op == "=":
            if isinstance(left, Property):
                right = _mask_literal(right, _bound_token(schema, labels.get(left.var), left.name))
            if isinstance(right, Property):
                left = _mask_literal(left, _bound_token(schema, labels.get(right.var), right.name))
        left = _mask_literal(_mask_expr(left, labels, schema), None)
        right = _mask_literal(_mask_expr(right, labels, schema), None)
        return Comparison(expr.op, left, right)
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, _mask_expr(expr.left, labels, schema), _mask_expr(expr.right, labels, schema))
    if isinstance(expr, Not):
        return Not(_mask_expr(expr.operand, labels, schema))
    if isinstance(expr, Aggregate) and expr.arg is not None:
        return Aggregate(expr.func, _mask_expr(expr.arg, labels, schema), expr.distinct)
    return expr


def mask_ast(ast: QueryAst, schema: GraphSchema) -> QueryAst:
    labels = {n.var: n.label for n in ast.node_patterns() if n.var and n.label}
    paths = []
    for path in ast.paths:
        nodes = []
        for node in path.nodes:
            props = tuple(
                (key, _mask_literal(value, _bound_token(schema, node.label, key)))
                for key, value in node.props
            )
            nodes.append(NodePattern(node.var, node.label, props))
        paths.append(PathPattern(tuple(nodes), path.edges))
    where = None if ast.where is None else _mask_expr(ast.where, labels, schema)
    returns = tuple(ReturnItem(_mask_expr(i.expr, labels, schema)) for i in ast.returns)
    order = tuple(SortKey(_mask_expr(k.expr, labels, schema), k.descending) for k in ast.order_by)
    return replace(ast, paths=tuple(paths), where=where, returns=returns, order_by=order)


def mask_entities(ast: QueryAst, schema: GraphSchema) -> str:
    """Canonical text with entity, date and number literals replaced by placeholder tokens."""
    return print_canonical(mask_ast(ast, schema))


# --- keyword statistics -----------------------------------------------------

KEYWORD_GROUPS = {
    "query_control": ("MATCH", "GO", "FETCH", "LOOKUP", "WHERE", "YIELD", "WITH",
                      "LIMIT", "ORDER BY", "GROUP BY", "RETURN"),
    "logical": ("AND", "OR", "NOT", "XOR"),
    "traversal": ("VERTEX", "EDGE", "OVER", "REVERSELY", "BIDIRECT"),
    "aggregation": ("COUNT", "SUM", "AVG", "MAX", "MIN", "COLLECT", "DISTINCT"),
}
ALL_KEYWORDS = tuple(k for group in KEYWORD_GROUPS.values() for k in group)
STRUCTURAL_KEYWORDS = ("MATCH", "RETURN")


@dataclass(frozen=True)
class KeywordCounts:
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def informative_total(self) -> int:
        return sum(n for k, n in self.counts.items() if k not in STRUCTURAL_KEYWORDS)


def count_keywords(text: str) -> KeywordCounts:
    """Count the analysed keywords in a query's token stream.

    ``ORDER BY`` and ``GROUP BY`` count once per occurrence; words used as
    property names (after '.' or ':' or before ':') are not keywords.
    """
    tokens = tokenize(text, lenient=True)
    counts: Counter = Counter()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "word":
            prev = tokens[i - 1] if i else None
            nxt = tokens[i + 1]
            as_name = (prev is not None and prev.is_punct(".", ":")) or nxt.is_punct(":")
            word = tok.text.upper()
            if not as_name:
                if word in ("ORDER", "GROUP") and nxt.is_kw("BY"):
                    counts[f"{word} BY"] += 1
                    i += 2
                    continue
                if word in ALL_KEYWORDS:
                    counts[word] += 1
        i += 1
    return KeywordCounts(dict(counts))


# --- query types ------------------------------------------------------------


class QueryType(str, Enum):
    ENTITY_PROPERTY = "EntityProperty"
    NUMERICAL_SORTING = "NumericalSorting"
    RELATIONSHIP_INFERENCE = "RelationshipInference"
    YES_NO = "YesNo"
    RELATIONSHIP_FILTERING = "RelationshipFiltering"
    ATTRIBUTE_COMPARISON = "AttributeComparison"
    EDGE_PROPERTY = "EdgeProperty"
    STRING_FILTERING = "StringFiltering"


def _is_boolean_shaped(expr: Expr) -> bool:
    if isinstance(expr, (Comparison, BoolOp, Not)):
        return True
    return isinstance(expr, Literal) and expr.kind == "bool"


def _entity_literal_count(ast: QueryAst, schema: GraphSchema | None) -> int:
    labels = {n.var: n.label for n in ast.node_patterns() if n.var and n.label}

    def is_entity(label, prop, value) -> bool:
        if not (isinstance(value, Literal) and value.kind == "string"):
            return False
        if schema is None:
            return True
        return _bound_token(schema, label, prop) is not None

    count = 0
    for node in ast.node_patterns():
        count += sum(1 for k, v in node.props if is_entity(node.label, k, v))
    if ast.where is not None:
        for sub in walk(ast.where):
            if isinstance(sub, Comparison) and sub.op == "=":
                for prop, lit in ((sub.left, sub.right), (sub.right, sub.left)):
                    if isinstance(prop, Property) and is_entity(labels.get(prop.var), prop.name, lit):
                        count += 1
    return count


def _compares_two_entities(where: Expr | None) -> bool:
    if where is None:
        return False
    for sub in walk(where):
        if (
            isinstance(sub, Comparison)
            and isinstance(sub.left, Property)
            and isinstance(sub.right, Property)
            and sub.left.var != sub.right.var
        ):
            return True
    return False


def _string_filter(ast: QueryAst, schema: GraphSchema | None) -> bool:
    if ast.where is None:
        return False
    labels = ast.labels()
    for sub in walk(ast.where):
        if not isinstance(sub, Comparison) or sub.op == "=":
            continue
        for prop, lit in ((sub.left, sub.right), (sub.right, sub.left)):
            if isinstance(lit, Literal) and lit.kind == "string":
                if schema is not None and isinstance(prop, Property):
                    owner = schema.node_type(labels.get(prop.var, "")) or schema.edge_type(labels.get(prop.var, ""))
                    if owner is not None and owner.kind_of(prop.name) == "date":
                        continue
                return True
    return False


def classify_query_type(ast: QueryAst, schema: GraphSchema | None = None) -> QueryType:
    """Assign one query type; the first matching rule wins.

    With a schema, entity literals are restricted to placeholder-bound
    properties and date comparisons do not count as string filters.
    """
    if ast.order_by:
        return QueryType.NUMERICAL_SORTING
    if any(_is_boolean_shaped(item.expr) for item in ast.returns):
        return QueryType.YES_NO
    if _entity_literal_count(ast, schema) >= 2 and _compares_two_entities(ast.where):
        return QueryType.ATTRIBUTE_COMPARISON
    edge_vars = ast.edge_vars()
    for item in ast.returns:
        if any(isinstance(s, Property) and s.var in edge_vars for s in walk(item.expr)):
            return QueryType.EDGE_PROPERTY
    if _string_filter(ast, schema):
        return QueryType.STRING_FILTERING
    hops = sum(len(p.edges) for p in ast.paths)
    if hops >= 2:
        return QueryType.RELATIONSHIP_FILTERING if ast.where is not None else QueryType.RELATIONSHIP_INFERENCE
    return QueryType.ENTITY_PROPERTY
