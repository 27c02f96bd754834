"""The bundled financial fixture: schema, graph and the four-turn golden dialogue."""

from __future__ import annotations

from importlib.resources import files

from .graph_store import GraphSchema, PropertyGraph, load_graph, load_schema

_DATA = files("gqlforge") / "data"

# The fixture's "today"; every dated question without an explicit date refers to it.
FIXTURE_TODAY = "2025-01-08"

GOLDEN_TURNS = [
    (
        "Which securities stock opened at the highest price today?",
        "match (s:stock)-[:belong_to]->(i:industry) WHERE i.name = 'securities' "
        "return s.name order by s.opening_price desc limit 1",
        ["CITIC Securities"],
    ),
    (
        "What price?",
        "match (s:stock {name: 'CITIC Securities'})-[:has_data]->"
        "(d:stock_data {date: '2025-01-08'}) return d.opening_price",
        [30.26],
    ),
    (
        "And yesterday?",
        "match (s:stock {name: 'CITIC Securities'})-[:has_data]->"
        "(d:stock_data {date: '2025-01-07'}) return d.opening_price",
        [36.25],
    ),
    (
        "How about Guotai Junan?",
        "match (s:stock {name: 'Guotai Junan Securities'})-[:has_data]->"
        "(d:stock_data {date: '2025-01-08'}) return d.opening_price",
        [20.00],
    ),
]


def schema_path():
    return _DATA / "fixture_schema.json"


def graph_path():
    return _DATA / "fixture_graph.json"


def golden_dialogue_path():
    return _DATA / "golden_dialogue.jsonl"


def fixture_schema() -> GraphSchema:
    return load_schema(schema_path())


def fixture_graph() -> PropertyGraph:
    return load_graph(fixture_schema(), graph_path())


def golden_dialogue():
    """The four-turn worked example as a Dialogue (imported data: no 5-8 round rule)."""
    from .dialogue import Dialogue, Pattern, Turn
    from .forge import turn_entities
    from .gql import execute, parse, print_canonical

    graph = fixture_graph()
    patterns = [None, Pattern.P1, Pattern.P2, Pattern.P4]
    complete = [
        "Which stock in the securities industry had the highest opening price on 2025-01-08?",
        "What is the opening price of CITIC Securities on 2025-01-08?",
        "What is the opening price of CITIC Securities on 2025-01-07?",
        "What is the opening price of Guotai Junan Securities on 2025-01-08?",
    ]
    turns = []
    for i, ((raw, gql, _), pattern, full) in enumerate(zip(GOLDEN_TURNS, patterns, complete), 1):
        gql = print_canonical(parse(gql))
        answer = tuple(execute(parse(gql), graph).values())
        entities, relations = turn_entities(gql, list(answer), graph)
        turns.append(Turn(i, raw, full, gql, answer, pattern, entities, relations))
    return Dialogue("golden", tuple(turns), {"source": "import", "today": FIXTURE_TODAY})


def market_graph(n_industries: int = 4, n_stocks: int = 16, n_days: int = 5, seed: int = 0,
                 start: str = "2025-01-06"):
    """A seeded synthetic market over the fixture schema, for larger forging runs."""
    import datetime as dt
    import random

    from .graph_store import Edge, Node, PropertyGraph

    rng = random.Random(f"market:{seed}")
    sectors = ["securities", "banking", "liquor", "software", "pharma", "energy", "media", "steel"]
    syllables = ["Hua", "Xin", "Zhong", "Tai", "Jin", "Long", "Feng", "Kang", "Rui", "Sheng", "Da", "Ming"]
    nodes, edges = [], []
    industries = []
    for i in range(n_industries):
        name = sectors[i] if i < len(sectors) else f"sector {i}"
        nid = f"industry:{name.replace(' ', '_')}"
        industries.append(nid)
        nodes.append(Node(nid, "industry", {"name": name}))
    day0 = dt.date.fromisoformat(start)
    used = set()
    for s in range(n_stocks):
        while True:
            name = f"{rng.choice(syllables)}{rng.choice(syllables).lower()} {rng.choice(['Holdings', 'Group', 'Tech', 'Industries'])}"
            if name not in used:
                used.add(name)
                break
        code = f"{600000 + s * 7:06d}"
        price = round(rng.uniform(5, 120), 2)
        sid = f"stock:{code}"
        series = []
        for d in range(n_days):
            open_p = round(price * rng.uniform(0.95, 1.05), 2)
            close_p = round(open_p * rng.uniform(0.95, 1.05), 2)
            high = round(max(open_p, close_p) * rng.uniform(1.0, 1.03), 2)
            series.append((open_p, close_p, high, rng.randint(100_000, 5_000_000)))
            price = close_p
        nodes.append(Node(sid, "stock", {"name": name, "code": code, "opening_price": series[-1][0],
                                         "closing_price": series[-1][1], "listed": rng.random() < 0.9}))
        edges.append(Edge(sid, "belong_to", industries[s % n_industries],
                          {"since": (day0 - dt.timedelta(days=rng.randint(400, 8000))).isoformat()}))
        for d, (o, c, h, v) in enumerate(series):
            date = (day0 + dt.timedelta(days=d)).isoformat()
            did = f"data:{code}:{date}"
            nodes.append(Node(did, "stock_data", {"date": date, "opening_price": o, "closing_price": c,
                                                  "highest_price": h, "volume": v}))
            edges.append(Edge(sid, "has_data", did, {}))
    return PropertyGraph.build(fixture_schema(), nodes, edges)
