"""In-memory evaluation of a :class:`QueryAst` against a :class:`PropertyGraph`.

Row order is always deterministic: without ORDER BY rows are sorted by their
full value tuple, and ORDER BY ties fall back to that same tuple order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterator

from ..errors import GqlTypeError, SemanticError
from ..graph_store import PropertyGraph
from .ast import (
    Aggregate,
    BoolOp,
    Comparison,
    Expr,
    Literal,
    Not,
    Placeholder,
    Property,
    QueryAst,
    Variable,
    has_aggregate,
    walk,
)
from .printer import format_expr

FLOAT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row arity differs from column count")

    def values(self) -> list:
        """Scalars for single-column tables, row lists otherwise."""
        if len(self.columns) == 1:
            return [row[0] for row in self.rows]
        return [list(row) for row in self.rows]

    def __len__(self):
        return len(self.rows)


# --- value helpers ----------------------------------------------------------


def is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def sort_key(value: Any):
    """Total order over result values; nulls sort last."""
    if value is None:
        return (9, 0)
    if isinstance(value, bool):
        return (1, value)
    if is_number(value):
        return (2, value)
    if isinstance(value, str):
        return (3, value)
    if isinstance(value, (list, tuple)):
        return (4, tuple(sort_key(v) for v in value))
    return (5, repr(value))


def row_key(row) -> tuple:
    return tuple(sort_key(v) for v in row)


def values_equal(a: Any, b: Any) -> bool:
    """Equality used for result comparison: integers exact, decimals to 1e-9."""
    if is_number(a) and is_number(b):
        if isinstance(a, float) or isinstance(b, float):
            return abs(a - b) <= FLOAT_TOLERANCE
        return a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _kind(value: Any) -> str:
    if isinstance(value, bool):
        return "boolean"
    if is_number(value):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        return "list"
    return type(value).__name__


def compare(op: str, a: Any, b: Any) -> bool | None:
    """Three-valued comparison; None when either side is null."""
    if a is None or b is None:
        return None
    ka, kb = _kind(a), _kind(b)
    if ka != kb:
        raise GqlTypeError(f"cannot compare {ka} with {kb}")
    if ka == "list":
        raise GqlTypeError("cannot compare lists")
    if ka == "number":
        eq = values_equal(a, b)
        if op == "=":
            return eq
        if op == "<>":
            return not eq
        if op == "<":
            return not eq and a < b
        if op == "<=":
            return eq or a < b
        if op == ">":
            return not eq and a > b
        if op == ">=":
            return eq or a > b
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise SemanticError(f"unknown operator {op!r}")


def logic(op: str, a: bool | None, b: bool | None) -> bool | None:
    for v in (a, b):
        if v is not None and not isinstance(v, bool):
            raise GqlTypeError(f"{op} needs boolean operands")
    if op == "AND":
        if a is False or b is False:
            return False
        return None if a is None or b is None else True
    if op == "OR":
        if a is True or b is True:
            return True
        return None if a is None or b is None else False
    if op == "XOR":
        return None if a is None or b is None else a != b
    raise SemanticError(f"unknown boolean operator {op!r}")


def aggregate_values(func: str, values: list, distinct: bool, star: bool = False) -> Any:
    if star:
        return len(values)
    present = [v for v in values if v is not None]
    if distinct:
        unique = []
        for v in sorted(present, key=sort_key):
            if not unique or not (unique[-1] == v and _kind(unique[-1]) == _kind(v)):
                unique.append(v)
        present = unique
    if func == "COUNT":
        return len(present)
    if func == "COLLECT":
        return sorted(present, key=sort_key)
    if func in ("SUM", "AVG"):
        if any(not is_number(v) for v in present):
            raise GqlTypeError(f"{func} needs numeric values")
        if func == "SUM":
            if all(isinstance(v, int) for v in present):
                return sum(present)
            return math.fsum(present)
        return math.fsum(present) / len(present) if present else None
    if func in ("MAX", "MIN"):
        if not present:
            return None
        kinds = {_kind(v) for v in present}
        if len(kinds) > 1:
            raise GqlTypeError(f"{func} over mixed kinds {sorted(kinds)}")
        return max(present) if func == "MAX" else min(present)
    raise SemanticError(f"unknown aggregate {func!r}")


# --- static checks ----------------------------------------------------------


def _static_kind(expr: Expr, labels: dict[str, str], graph: PropertyGraph) -> str | None:
    schema = graph.schema
    if isinstance(expr, Literal):
        return {"string": "string", "int": "number", "float": "number", "bool": "boolean"}.get(expr.kind)
    if isinstance(expr, Property):
        label = labels.get(expr.var)
        if label is None:
            return None
        owner = schema.node_type(label) or schema.edge_type(label)
        kind = owner.kind_of(expr.name) if owner else None
        return "string" if kind == "date" else kind
    return None


def validate(ast: QueryAst, graph: PropertyGraph) -> None:
    """Reject unknown labels/properties, placeholders and ill-typed comparisons."""
    schema = graph.schema
    for node in ast.node_patterns():
        if node.label is not None and schema.node_type(node.label) is None:
            raise SemanticError(f"unknown node label {node.label!r}")
        nt = schema.node_type(node.label) if node.label else None
        for key, value in node.props:
            if isinstance(value, Placeholder):
                raise SemanticError(f"unfilled placeholder {value.token}")
            if nt is not None:
                kind = nt.kind_of(key)
                if kind is None:
                    raise SemanticError(f"{node.label} has no property {key!r}")
                lk = _static_kind(value, {}, graph)
                if lk is not None and (kind if kind != "date" else "string") != lk:
                    raise GqlTypeError(f"{node.label}.{key} is {kind}, literal is {lk}")
            elif not any(t.kind_of(key) for t in schema.node_types):
                raise SemanticError(f"no node type has property {key!r}")
    for edge in ast.edge_patterns():
        if edge.type is not None and schema.edge_type(edge.type) is None:
            raise SemanticError(f"unknown edge type {edge.type!r}")
    labels = ast.labels()
    edge_vars = ast.edge_vars()
    for expr in ast.expressions():
        for sub in walk(expr):
            if isinstance(sub, Placeholder):
                raise SemanticError(f"unfilled placeholder {sub.token}")
            if isinstance(sub, Property):
                label = labels.get(sub.var)
                if label is not None:
                    owner = schema.edge_type(label) if sub.var in edge_vars else schema.node_type(label)
                    if owner is None or owner.kind_of(sub.name) is None:
                        raise SemanticError(f"{label} has no property {sub.name!r}")
                else:
                    pool = schema.edge_types if sub.var in edge_vars else schema.node_types
                    if not any(t.kind_of(sub.name) for t in pool):
                        raise SemanticError(f"no type has property {sub.name!r}")
            if isinstance(sub, Comparison):
                lk = _static_kind(sub.left, labels, graph)
                rk = _static_kind(sub.right, labels, graph)
                if lk is not None and rk is not None and lk != rk:
                    raise GqlTypeError(f"cannot compare {lk} with {rk} in {format_expr(sub)}")
    for item in ast.returns:
        if has_aggregate(item.expr):
            _check_aggregate_item(item.expr)


def _check_aggregate_item(expr: Expr, inside: bool = False) -> None:
    if isinstance(expr, Aggregate):
        return
    if isinstance(expr, (Variable, Property)) and not inside:
        raise SemanticError(
            f"{format_expr(expr)} appears outside an aggregate in an aggregating expression"
        )
    if isinstance(expr, (Comparison, BoolOp)):
        _check_aggregate_item(expr.left)
        _check_aggregate_item(expr.right)
    elif isinstance(expr, Not):
        _check_aggregate_item(expr.operand)


# --- matching ---------------------------------------------------------------


def _bindings(ast: QueryAst, graph: PropertyGraph) -> Iterator[dict]:
    """All variable bindings of the MATCH paths (edges used at most once)."""
    steps = []
    anon = 0
    for path in ast.paths:
        for i, node in enumerate(path.nodes):
            if i > 0:
                edge = path.edges[i - 1]
                evar = edge.var
                if evar is None:
                    evar = f"#e{anon}"
                    anon += 1
                steps.append(("edge", edge, evar))
            var = node.var
            if var is None:
                var = f"#n{anon}"
                anon += 1
            steps.append(("node" if i == 0 else "hop", node, var))

    def node_ok(node_id, pattern) -> bool:
        node = graph.nodes[node_id]
        if pattern.label is not None and node.type != pattern.label:
            return False
        for key, lit in pattern.props:
            if compare("=", node.props.get(key), lit.value) is not True:
                return False
        return True

    def node_candidates(pattern):
        pool = graph.nodes_of_type(pattern.label) if pattern.label else sorted(graph.nodes)
        return [nid for nid in pool if node_ok(nid, pattern)]

    binding: dict[str, Any] = {}
    used_edges: set[int] = set()

    def run(k: int, current: str | None):
        if k == len(steps):
            yield dict(binding)
            return
        kind, pattern, var = steps[k]
        if kind == "node":
            if var in binding:
                if node_ok(binding[var], pattern):
                    yield from run(k + 1, binding[var])
                return
            for nid in node_candidates(pattern):
                binding[var] = nid
                yield from run(k + 1, nid)
                del binding[var]
            return
        # an edge step followed by its hop node
        _, node_pattern, node_var = steps[k + 1]
        edges = graph.out_edges(current) if pattern.direction == "right" else graph.in_edges(current)
        for edge in edges:
            if pattern.type is not None and edge.type != pattern.type:
                continue
            if edge.index in used_edges:
                continue
            if var in binding and binding[var] is not edge:
                continue
            other = edge.dst if pattern.direction == "right" else edge.src
            if node_var in binding and binding[node_var] != other:
                continue
            if not node_ok(other, node_pattern):
                continue
            new_edge = var not in binding
            new_node = node_var not in binding
            binding[var] = edge
            binding[node_var] = other
            used_edges.add(edge.index)
            yield from run(k + 2, other)
            used_edges.discard(edge.index)
            if new_edge:
                del binding[var]
            if new_node:
                del binding[node_var]

    yield from run(0, None)


# --- evaluation -------------------------------------------------------------


class _Evaluator:
    def __init__(self, graph: PropertyGraph):
        self.graph = graph

    def value(self, expr: Expr, binding: dict, group: list | None = None) -> Any:
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, Variable):
            bound = binding[expr.name]
            return bound if isinstance(bound, str) else bound.id
        if isinstance(expr, Property):
            bound = binding[expr.var]
            if isinstance(bound, str):
                return self.graph.nodes[bound].props.get(expr.name)
            return bound.props.get(expr.name)
        if isinstance(expr, Comparison):
            return compare(expr.op, self.value(expr.left, binding, group), self.value(expr.right, binding, group))
        if isinstance(expr, BoolOp):
            return logic(expr.op, self.value(expr.left, binding, group), self.value(expr.right, binding, group))
        if isinstance(expr, Not):
            inner = self.value(expr.operand, binding, group)
            if inner is not None and not isinstance(inner, bool):
                raise GqlTypeError("NOT needs a boolean operand")
            return None if inner is None else not inner
        if isinstance(expr, Aggregate):
            if group is None:
                raise SemanticError("aggregate outside an aggregating RETURN")
            if expr.arg is None:
                return aggregate_values("COUNT", group, False, star=True)
            vals = [self.value(expr.arg, b) for b in group]
            return aggregate_values(expr.func, vals, expr.distinct)
        if isinstance(expr, Placeholder):
            raise SemanticError(f"unfilled placeholder {expr.token}")
        raise SemanticError(f"cannot evaluate {expr!r}")


def execute(ast: QueryAst, graph: PropertyGraph) -> ResultTable:
    validate(ast, graph)
    ev = _Evaluator(graph)
    bindings = [b for b in _bindings(ast, graph) if ast.where is None or ev.value(ast.where, b) is True]
    columns = tuple(format_expr(i.expr) for i in ast.returns)
    exprs = [i.expr for i in ast.returns]
    aggregating = any(has_aggregate(e) for e in exprs)

    def column_of(expr: Expr) -> int:
        for idx, e in enumerate(exprs):
            if e == expr:
                return idx
        raise SemanticError(
            f"ORDER BY {format_expr(expr)} must repeat a RETURN item when aggregating or DISTINCT"
        )

    entries: list[tuple[tuple, tuple]] = []  # (row, order values)
    if aggregating:
        key_idx = [i for i, e in enumerate(exprs) if not has_aggregate(e)]
        groups: dict[tuple, list] = {}
        reps: dict[tuple, tuple] = {}
        for b in bindings:
            vals = tuple(ev.value(exprs[i], b) for i in key_idx)
            gk = row_key(vals)
            groups.setdefault(gk, []).append(b)
            reps.setdefault(gk, vals)
        if not key_idx and not groups:
            groups[()] = []
            reps[()] = ()
        for gk, members in groups.items():
            keyvals = dict(zip(key_idx, reps[gk]))
            row = tuple(
                keyvals[i] if i in keyvals else ev.value(exprs[i], {}, members)
                for i in range(len(exprs))
            )
            entries.append((row, ()))
        order_cols = [column_of(k.expr) for k in ast.order_by]
        entries = [(row, tuple(row[c] for c in order_cols)) for row, _ in entries]
    else:
        for b in bindings:
            row = tuple(ev.value(e, b) for e in exprs)
            if ast.distinct:
                keys = tuple(row[column_of(k.expr)] for k in ast.order_by)
            else:
                keys = tuple(ev.value(k.expr, b) for k in ast.order_by)
            entries.append((row, keys))

    if ast.distinct:
        seen = set()
        unique = []
        for row, keys in entries:
            rk = row_key(row)
            if rk not in seen:
                seen.add(rk)
                unique.append((row, keys))
        entries = unique

    entries.sort(key=lambda e: row_key(e[0]))
    for pos in range(len(ast.order_by) - 1, -1, -1):
        desc = ast.order_by[pos].descending
        entries.sort(key=lambda e, p=pos: sort_key(e[1][p]), reverse=desc)
    rows = [row for row, _ in entries]
    if ast.limit is not None:
        rows = rows[: ast.limit]
    return ResultTable(columns, tuple(rows))


def tables_equal(a: ResultTable, b: ResultTable, ordered: bool) -> bool:
    """Row-wise equality; ``ordered=False`` compares multisets of rows."""
    if len(a.rows) != len(b.rows):
        return False
    if any(len(r) != len(a.columns) for r in b.rows) or len(a.columns) != len(b.columns):
        return False
    ra, rb = list(a.rows), list(b.rows)
    if not ordered:
        ra.sort(key=row_key)
        rb.sort(key=row_key)
    return all(
        len(x) == len(y) and all(values_equal(u, v) for u, v in zip(x, y)) for x, y in zip(ra, rb)
    )
