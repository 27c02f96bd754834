import pytest
from hypothesis import HealthCheck, given, settings

from _strategies import queries
from gqlforge.errors import GqlSyntaxError, GqlTypeError, SemanticError, UnboundVariableError, UnsupportedStatement
from gqlforge.fixtures import GOLDEN_TURNS
from gqlforge.gql import (
    QueryType,
    canonicalize,
    classify_query_type,
    count_keywords,
    execute,
    mask_ast,
    mask_entities,
    parse,
    print_canonical,
    run,
    tables_equal,
)

Q1 = ("match (s:stock)-[:belong_to]->(i:industry) WHERE i.name = 'securities' "
      "return s.name order by s.opening_price desc limit 1")
Q2 = GOLDEN_TURNS[1][1]


# --- parsing and printing ----------------------------------------------------------


def test_parse_worked_example_shape():
    ast = parse(Q1)
    assert len(ast.paths) == 1 and len(ast.paths[0].edges) == 1
    assert ast.where.op == "=" and len(ast.returns) == 1
    assert len(ast.order_by) == 1 and ast.order_by[0].descending
    assert ast.limit == 1


def test_canonical_form_of_worked_example():
    assert print_canonical(parse(Q1)) == (
        "MATCH (v1:stock)-[:belong_to]->(v2:industry) WHERE v2.name = 'securities' "
        "RETURN v1.name ORDER BY v1.opening_price DESC LIMIT 1"
    )


def test_case_and_spacing_do_not_matter():
    loud = "MATCH   (S:stock)-[:belong_to]->(I:industry)\nwhere I.name='securities' RETURN S.name ORDER BY S.opening_price DESC LIMIT 1"
    assert print_canonical(parse(loud)) == print_canonical(parse(Q1))


def test_property_maps_sorted_and_parens_minimal():
    ast = parse("MATCH (a:stock {name: 'x', code: '1'}) WHERE (a.listed AND (a.opening_price > 1)) OR NOT (a.code = '2') RETURN a")
    assert print_canonical(ast) == (
        "MATCH (v1:stock {code: '1', name: 'x'}) WHERE v1.listed AND v1.opening_price > 1 OR NOT v1.code = '2' RETURN v1"
    )
    right_nested = parse("MATCH (a) WHERE a.x OR (a.y OR a.z) RETURN a")
    assert print_canonical(right_nested).endswith("WHERE v1.x OR (v1.y OR v1.z) RETURN v1")


def test_empty_input_is_syntax_error_at_zero():
    with pytest.raises(GqlSyntaxError) as err:
        parse("")
    assert err.value.offset == 0


def test_unclosed_node_pattern():
    with pytest.raises(GqlSyntaxError) as err:
        parse("match (s:stock return s")
    assert "node pattern" in str(err.value) or "')'" in str(err.value)


def test_offsets_are_bytes():
    with pytest.raises(GqlSyntaxError) as err:
        parse("MATCH (s {name: 'é'}) RETURN s ^")
    assert err.value.offset == len("MATCH (s {name: 'é'}) RETURN s ".encode())


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        parse("MATCH (s:stock) RETURN t.name")


@pytest.mark.parametrize("text", ["GO FROM 'x' OVER belong_to", "FETCH PROP ON stock 'x'",
                                  "LOOKUP ON stock", "MATCH (s) WITH s RETURN s"])
def test_nebula_statements_are_recognised_but_unsupported(text):
    with pytest.raises(UnsupportedStatement):
        parse(text)


@settings(max_examples=300, deadline=None, suppress_health_check=list(HealthCheck))
@given(queries())
def test_print_is_idempotent(ast):
    once = print_canonical(ast)
    assert print_canonical(parse(once)) == once
    assert parse(once) == canonicalize(ast)


# --- execution ------------------------------------------------------------------------


def test_golden_queries(graph):
    for _, gql, answer in GOLDEN_TURNS:
        table = run(gql, graph)
        assert tables_equal(table, type(table)(table.columns, tuple((a,) for a in answer)), ordered=True)


def test_map_constraint_query(graph):
    q = ("MATCH (s:stock {name:'CITIC Securities'})-[:has_data]->(d:stock_data {date:'2025-01-08'}) "
         "RETURN d.opening_price")
    assert run(q, graph).values() == [30.26]


def test_count_over_no_match_is_zero(graph):
    assert run("MATCH (s:stock {name: 'Nobody'}) RETURN COUNT(s)", graph).values() == [0]
    assert run("MATCH (s:stock {name: 'Nobody'}) RETURN COUNT(*)", graph).values() == [0]


def test_grouping_and_distinct(graph):
    rows = run("MATCH (s:stock)-[:has_data]->(d:stock_data) RETURN s.name, COUNT(d), MAX(d.volume) ORDER BY s.name",
               graph).rows
    assert [r[:2] for r in rows] == [("CITIC Securities", 3), ("Guotai Junan Securities", 3)]
    assert run("MATCH (s:stock)-[:belong_to]->(i:industry) RETURN DISTINCT i.name", graph).values() == ["securities"]


def test_unordered_rows_sorted_by_value(graph):
    names = run("MATCH (s:stock) RETURN s.name", graph).values()
    assert names == sorted(names)


def test_limit_is_a_prefix(graph):
    q = "MATCH (d:stock_data) RETURN d.date, d.closing_price ORDER BY d.closing_price DESC"
    full = run(q, graph).rows
    for k in range(len(full) + 1):
        assert run(f"{q} LIMIT {k}", graph).rows == full[:k]


def test_semantic_and_type_errors(graph):
    with pytest.raises(SemanticError):
        run("MATCH (f:fund_manager) RETURN f", graph)
    with pytest.raises(SemanticError):
        run("MATCH (s:stock) RETURN s.colour", graph)
    with pytest.raises(GqlTypeError):
        run("MATCH (s:stock) WHERE s.name > 3 RETURN s", graph)
    with pytest.raises(SemanticError):
        run("MATCH (s:stock {name: [s]}) RETURN s", graph)


def test_float_tolerance(graph):
    assert run("MATCH (s:stock) WHERE s.opening_price = 30.2600000000001 RETURN s.name", graph).values() == [
        "CITIC Securities"]


def test_three_valued_logic(schema):
    from gqlforge.graph_store import graph_from_dict
    g = graph_from_dict(schema, {"nodes": [
        {"id": "a", "type": "stock", "props": {"name": "A", "opening_price": None}},
        {"id": "b", "type": "stock", "props": {"name": "B", "opening_price": 5}}], "edges": []})
    assert run("MATCH (s:stock) WHERE s.opening_price > 1 OR s.name = 'A' RETURN s.name", g).values() == ["A", "B"]
    assert run("MATCH (s:stock) WHERE NOT s.opening_price > 1 RETURN s.name", g).values() == []
    assert run("MATCH (s:stock) RETURN s.name ORDER BY s.opening_price", g).values() == ["B", "A"]


# --- masking, keywords and types ---------------------------------------------------------


def test_mask_entity_and_date(schema):
    masked = mask_entities(parse(Q2), schema)
    assert "(v1:stock {name: '[s]'})" in masked and "(v2:stock_data {date: '[d]'})" in masked


def test_mask_numbers(schema):
    masked = mask_entities(parse("MATCH (a:stock) WHERE a.opening_price > 30 RETURN a.name"), schema)
    assert masked.endswith("WHERE v1.opening_price > [m] RETURN v1.name")


def test_mask_noop_and_idempotent(schema):
    plain = parse("MATCH (a:stock)-[:has_data]->(d:stock_data) RETURN a.name, d.volume")
    assert mask_entities(plain, schema) == print_canonical(plain)
    for _, gql, _ in GOLDEN_TURNS:
        once = mask_ast(parse(gql), schema)
        assert mask_ast(once, schema) == once


def test_count_keywords_examples():
    k = count_keywords(Q1)
    assert k.counts == {"MATCH": 1, "WHERE": 1, "RETURN": 1, "ORDER BY": 1, "LIMIT": 1}
    assert k.informative_total == 3
    assert count_keywords("MATCH (a) RETURN a").informative_total == 0
    logic = count_keywords("MATCH (a) WHERE a.x AND a.y OR NOT a.z RETURN a").counts
    assert (logic["AND"], logic["OR"], logic["NOT"]) == (1, 1, 1)
    assert count_keywords("MATCH (a) RETURN a.count, a.match").counts == {"MATCH": 1, "RETURN": 1}


def test_keyword_totals_survive_canonicalisation():
    for _, gql, _ in GOLDEN_TURNS:
        assert count_keywords(gql).counts == count_keywords(print_canonical(parse(gql))).counts


@pytest.mark.parametrize("text, expected", [
    (Q1, QueryType.NUMERICAL_SORTING),
    (Q2, QueryType.ENTITY_PROPERTY),
    ("MATCH (s:stock {name: 'x'}) RETURN COUNT(s) > 0", QueryType.YES_NO),
    ("MATCH (a:stock), (b:stock) WHERE a.name = 'x' AND b.name = 'y' AND a.opening_price > b.opening_price "
     "RETURN a.name", QueryType.ATTRIBUTE_COMPARISON),
    ("MATCH (s:stock)-[r:belong_to]->(i:industry) RETURN r.since", QueryType.EDGE_PROPERTY),
    ("MATCH (s:stock) WHERE s.name <> 'x' RETURN s.code", QueryType.STRING_FILTERING),
    ("MATCH (i:industry)<-[:belong_to]-(s:stock)-[:has_data]->(d:stock_data) WHERE d.volume > 3 RETURN s.name",
     QueryType.RELATIONSHIP_FILTERING),
    ("MATCH (i:industry)<-[:belong_to]-(s:stock)-[:has_data]->(d:stock_data) RETURN d.date",
     QueryType.RELATIONSHIP_INFERENCE),
])
def test_query_types(text, expected, schema):
    assert classify_query_type(parse(text), schema) == expected


def test_date_inequality_is_not_string_filtering(schema):
    ast = parse("MATCH (d:stock_data) WHERE d.date >= '2025-01-07' RETURN d.volume")
    assert classify_query_type(ast, schema) == QueryType.ENTITY_PROPERTY


def test_oracle_sample_agrees():
    # a small slice of the oracle comparison; the acceptance suite runs the full 1000
    import _oracle
    from gqlforge.graph_store import graph_from_dict, schema_from_dict

    oracle_schema = schema_from_dict(_oracle.SCHEMA_DOC)
    for doc, name, q, rows, ordered in _oracle.cases(60, seed=99):
        got = [tuple(r) for r in execute(parse(q), graph_from_dict(oracle_schema, doc)).rows]
        assert _oracle.rows_agree(got, rows, ordered), (name, q)
