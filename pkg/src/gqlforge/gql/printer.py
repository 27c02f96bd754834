"""Canonical text form of a query.

Canonical form: upper-case keywords, single spaces, variables renamed v1, v2, ...
in order of first appearance in MATCH, property maps sorted by key, ASC omitted,
and the minimum parentheses the operator precedence requires.
"""

from __future__ import annotations

from dataclasses import replace

from .ast import (
    Aggregate,
    BoolOp,
    Comparison,
    EdgePattern,
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
)

_PREC = {"OR": 1, "XOR": 2, "AND": 3}
_NOT_PREC = 4
_CMP_PREC = 5
_ATOM_PREC = 6


def quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def format_literal(lit: Literal) -> str:
    if lit.kind == "string":
        return quote(lit.value)
    if lit.kind == "bool":
        return "TRUE" if lit.value else "FALSE"
    if lit.kind == "float":
        return repr(float(lit.value))
    if lit.kind == "null":
        return "NULL"
    return str(lit.value)


def _prec(expr: Expr) -> int:
    if isinstance(expr, BoolOp):
        return _PREC[expr.op]
    if isinstance(expr, Not):
        return _NOT_PREC
    if isinstance(expr, Comparison):
        return _CMP_PREC
    return _ATOM_PREC


def _wrap(expr: Expr, minimum: int) -> str:
    text = format_expr(expr)
    return f"({text})" if _prec(expr) < minimum else text


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Literal):
        return format_literal(expr)
    if isinstance(expr, Placeholder):
        return expr.token
    if isinstance(expr, Variable):
        return expr.name
    if isinstance(expr, Property):
        return f"{expr.var}.{expr.name}"
    if isinstance(expr, Aggregate):
        inner = "*" if expr.arg is None else format_expr(expr.arg)
        if expr.distinct:
            inner = "DISTINCT " + inner
        return f"{expr.func}({inner})"
    if isinstance(expr, Comparison):
        return f"{_wrap(expr.left, _ATOM_PREC)} {expr.op} {_wrap(expr.right, _ATOM_PREC)}"
    if isinstance(expr, BoolOp):
        p = _PREC[expr.op]
        return f"{_wrap(expr.left, p)} {expr.op} {_wrap(expr.right, p + 1)}"
    if isinstance(expr, Not):
        return f"NOT {_wrap(expr.operand, _NOT_PREC)}"
    raise TypeError(f"not an expression: {expr!r}")


def _format_map_value(value) -> str:
    return value.token if isinstance(value, Placeholder) else format_literal(value)


def format_node(node: NodePattern) -> str:
    text = node.var or ""
    if node.label:
        text += f":{node.label}"
    if node.props:
        body = ", ".join(f"{k}: {_format_map_value(v)}" for k, v in node.props)
        text += (" " if text else "") + "{" + body + "}"
    return f"({text})"


def format_edge(edge: EdgePattern) -> str:
    inner = edge.var or ""
    if edge.type:
        inner += f":{edge.type}"
    if edge.direction == "left":
        return f"<-[{inner}]-"
    return f"-[{inner}]->"


def format_path(path: PathPattern) -> str:
    parts = [format_node(path.nodes[0])]
    for edge, node in zip(path.edges, path.nodes[1:]):
        parts.append(format_edge(edge))
        parts.append(format_node(node))
    return "".join(parts)


def to_text(ast: QueryAst) -> str:
    """Render without renaming; keeps the query's own variable names."""
    parts = ["MATCH " + ", ".join(format_path(p) for p in ast.paths)]
    if ast.where is not None:
        parts.append("WHERE " + format_expr(ast.where))
    ret = "RETURN "
    if ast.distinct:
        ret += "DISTINCT "
    parts.append(ret + ", ".join(format_expr(i.expr) for i in ast.returns))
    if ast.order_by:
        keys = [format_expr(k.expr) + (" DESC" if k.descending else "") for k in ast.order_by]
        parts.append("ORDER BY " + ", ".join(keys))
    if ast.limit is not None:
        parts.append(f"LIMIT {ast.limit}")
    return " ".join(parts)


# --- canonicalisation -------------------------------------------------------


def _rename_expr(expr: Expr, names: dict[str, str]) -> Expr:
    if isinstance(expr, Variable):
        return Variable(names[expr.name])
    if isinstance(expr, Property):
        return Property(names[expr.var], expr.name)
    if isinstance(expr, Aggregate):
        arg = None if expr.arg is None else _rename_expr(expr.arg, names)
        return Aggregate(expr.func, arg, expr.distinct)
    if isinstance(expr, Comparison):
        return Comparison(expr.op, _rename_expr(expr.left, names), _rename_expr(expr.right, names))
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, _rename_expr(expr.left, names), _rename_expr(expr.right, names))
    if isinstance(expr, Not):
        return Not(_rename_expr(expr.operand, names))
    return expr


def canonicalize(ast: QueryAst) -> QueryAst:
    """Structural canonical form: renamed variables, sorted property maps."""
    names: dict[str, str] = {}

    def name_of(var):
        if var is None:
            return None
        if var not in names:
            names[var] = f"v{len(names) + 1}"
        return names[var]

    paths = []
    for path in ast.paths:
        nodes = []
        edges = []
        for i, node in enumerate(path.nodes):
            if i > 0:
                edge = path.edges[i - 1]
                edges.append(replace(edge, var=name_of(edge.var)))
            nodes.append(
                NodePattern(name_of(node.var), node.label, tuple(sorted(node.props, key=lambda kv: kv[0])))
            )
        paths.append(PathPattern(tuple(nodes), tuple(edges)))
    where = None if ast.where is None else _rename_expr(ast.where, names)
    returns = tuple(ReturnItem(_rename_expr(i.expr, names)) for i in ast.returns)
    order = tuple(SortKey(_rename_expr(k.expr, names), k.descending) for k in ast.order_by)
    return QueryAst(tuple(paths), returns, where, ast.distinct, order, ast.limit)


def print_canonical(ast: QueryAst) -> str:
    return to_text(canonicalize(ast))
