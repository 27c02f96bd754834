"""MATCH-form graph query engine: parse, print, execute, mask, analyse."""

from .analysis import (
    KEYWORD_GROUPS,
    KeywordCounts,
    QueryType,
    classify_query_type,
    count_keywords,
    mask_ast,
    mask_entities,
)
from .ast import QueryAst
from .executor import ResultTable, execute, tables_equal, values_equal
from .parser import parse
from .printer import canonicalize, print_canonical, to_text


def structurally_equal(a: QueryAst, b: QueryAst) -> bool:
    """Equality up to variable naming and property-map order."""
    return canonicalize(a) == canonicalize(b)


def run(text: str, graph) -> ResultTable:
    return execute(parse(text), graph)


__all__ = [
    "KEYWORD_GROUPS",
    "KeywordCounts",
    "QueryAst",
    "QueryType",
    "ResultTable",
    "canonicalize",
    "classify_query_type",
    "count_keywords",
    "execute",
    "mask_ast",
    "mask_entities",
    "parse",
    "print_canonical",
    "run",
    "structurally_equal",
    "tables_equal",
    "to_text",
    "values_equal",
]
