import json

import pytest

from gqlforge import fixtures
from gqlforge.errors import ConformanceError, EmptyTypeError, ParseError, SchemaError
from gqlforge.graph_store import (
    GraphSchema,
    conformance_violations,
    graph_from_dict,
    load_graph,
    load_schema,
    sample_entity,
    schema_from_dict,
)


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return path


def test_fixture_schema_shape(schema):
    assert [nt.name for nt in schema.node_types] == ["stock", "industry", "stock_data"]
    assert [et.name for et in schema.edge_types] == ["belong_to", "has_data"]
    assert schema.type_for_token("[s]").name == "stock"


def test_fixture_graph_contents(graph):
    assert len(graph.nodes_of_type("stock")) == 2
    assert graph.nodes_of_type("industry") == ("industry:securities",)
    assert len(graph.nodes_of_type("stock_data")) >= 3
    names = {graph.nodes[n].props["name"] for n in graph.nodes_of_type("stock")}
    assert names == {"CITIC Securities", "Guotai Junan Securities"}


def test_dangling_edge_type_endpoint(tmp_path):
    doc = {"node_types": [{"name": "a", "properties": []}],
           "edge_types": [{"name": "r", "source": "a", "target": "foo", "properties": []}]}
    with pytest.raises(SchemaError):
        load_schema(write(tmp_path, "s.json", doc))


def test_empty_schema_is_valid(tmp_path):
    s = load_schema(write(tmp_path, "s.json", {"node_types": [], "edge_types": []}))
    assert s.node_types == () and s.edge_types == ()


@pytest.mark.parametrize("doc", [
    {"node_types": [{"name": "a"}, {"name": "a"}]},
    {"node_types": [{"name": "a", "properties": [{"name": "x", "kind": "string"}],
                     "placeholder": {"token": "[z]", "bound_property": "x"}}]},
    {"node_types": [{"name": "a", "properties": [{"name": "x", "kind": "decimal"}]}]},
    {"node_types": [{"name": "a", "properties": [{"name": "x", "kind": "string"}],
                     "placeholder": {"token": "[s]", "bound_property": "y"}}]},
])
def test_schema_rejections(doc):
    with pytest.raises(SchemaError):
        schema_from_dict(doc)


def test_malformed_schema_file(tmp_path):
    with pytest.raises(ParseError):
        load_schema(write(tmp_path, "s.json", "{not json"))


def test_missing_edge_target(schema):
    doc = {"nodes": [{"id": "s", "type": "stock", "props": {"name": "X"}}],
           "edges": [{"src": "s", "type": "belong_to", "dst": "nowhere", "props": {}}]}
    with pytest.raises(ConformanceError) as err:
        graph_from_dict(schema, doc)
    assert "nowhere" in str(err.value)


def test_kind_mismatch_names_the_node(schema):
    doc = {"nodes": [{"id": "s", "type": "stock", "props": {"name": "X", "opening_price": "high"}}], "edges": []}
    with pytest.raises(ConformanceError) as err:
        graph_from_dict(schema, doc)
    assert err.value.item_id == "s" and "opening_price" in err.value.rule


def test_bad_date_is_rejected(schema):
    doc = {"nodes": [{"id": "d", "type": "stock_data", "props": {"date": "2025-13-40"}}], "edges": []}
    with pytest.raises(ConformanceError):
        graph_from_dict(schema, doc)


def test_loaded_graph_has_no_violations_and_reloads_equal(schema):
    g1 = load_graph(schema, fixtures.graph_path())
    g2 = load_graph(schema, fixtures.graph_path())
    assert conformance_violations(g1) == []
    assert g1 == g2


def test_graph_is_read_only(graph):
    with pytest.raises(TypeError):
        graph.nodes["x"] = None
    node = next(iter(graph.nodes.values()))
    with pytest.raises(TypeError):
        node.props["name"] = "changed"


def test_sample_entity(graph):
    assert sample_entity(graph, "stock", 7) == sample_entity(graph, "stock", 7)
    assert sample_entity(graph, "industry", 123) == "industry:securities"
    with pytest.raises(EmptyTypeError):
        sample_entity(graph, "fund_manager", 0)


def test_sample_entity_covers_every_node(graph):
    seen = {sample_entity(graph, "stock_data", s) for s in range(200)}
    assert seen == set(graph.nodes_of_type("stock_data"))


def test_market_graph_is_seeded():
    a = fixtures.market_graph(seed=3)
    assert a == fixtures.market_graph(seed=3)
    assert a != fixtures.market_graph(seed=4)
    assert len(a.nodes_of_type("stock")) == 16


def test_schema_roundtrip(schema):
    again = schema_from_dict(schema.to_dict())
    assert again == schema and again.fingerprint() == schema.fingerprint()
    assert isinstance(again, GraphSchema)
