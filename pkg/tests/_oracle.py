"""Brute-force reference evaluator for template queries.

Works directly on plain dicts of nodes and edges; nothing here imports the
engine, so agreement with ``gqlforge.gql.execute`` is an independent check.
Each template yields the query text plus a function that enumerates every
candidate binding tuple, filters, projects, groups and sorts by hand.
"""

import itertools
import math
import random

SCHEMA_DOC = {
    "node_types": [
        {"name": "person", "properties": [
            {"name": "name", "kind": "string"}, {"name": "age", "kind": "number"},
            {"name": "score", "kind": "number"}, {"name": "active", "kind": "boolean"}],
         "placeholder": {"token": "[p]", "bound_property": "name"}},
        {"name": "city", "properties": [{"name": "name", "kind": "string"}, {"name": "pop", "kind": "number"}],
         "placeholder": {"token": "[c]", "bound_property": "name"}},
    ],
    "edge_types": [
        {"name": "knows", "source": "person", "target": "person",
         "properties": [{"name": "weight", "kind": "number"}]},
        {"name": "lives_in", "source": "person", "target": "city",
         "properties": [{"name": "since", "kind": "date"}]},
    ],
}

NAMES = ["Ann", "Bo", "Cy", "Di", "Ed", "Flo", "Gus", "Hal", "Ivy", "Jo", "Kai", "Lu"]
CITIES = ["Oslo", "Lima", "Kyiv", "Pune", "Rome", "Suva"]
DATES = ["2020-01-01", "2021-06-15", "2022-03-30", "2023-11-02", "2024-07-19"]


def maybe(rng, value, p_null=0.12):
    return None if rng.random() < p_null else value


def random_graph(rng):
    """At most 30 nodes; duplicate names, nulls, self loops and parallel edges all occur."""
    n_person = rng.randint(1, 22)
    n_city = rng.randint(1, min(6, 30 - n_person))
    nodes = []
    for i in range(n_person):
        nodes.append({"id": f"p{i}", "type": "person", "props": {
            "name": rng.choice(NAMES),
            "age": maybe(rng, rng.randint(18, 70)),
            "score": maybe(rng, round(rng.uniform(0, 10), rng.choice([0, 1, 2]))),
            "active": maybe(rng, rng.random() < 0.5),
        }})
    for i in range(n_city):
        nodes.append({"id": f"c{i}", "type": "city", "props": {
            "name": rng.choice(CITIES), "pop": maybe(rng, rng.randint(1, 900))}})
    edges = []
    people = [n["id"] for n in nodes if n["type"] == "person"]
    cities = [n["id"] for n in nodes if n["type"] == "city"]
    for _ in range(rng.randint(0, 2 * n_person)):
        edges.append({"src": rng.choice(people), "type": "knows", "dst": rng.choice(people),
                      "props": {"weight": maybe(rng, rng.randint(1, 5))}})
    for p in people:
        for _ in range(rng.choice([0, 1, 1, 2])):
            edges.append({"src": p, "type": "lives_in", "dst": rng.choice(cities),
                          "props": {"since": maybe(rng, rng.choice(DATES))}})
    return {"nodes": nodes, "edges": edges}


# --- value semantics, written out independently ---------------------------------


def sk(v):
    # nulls last; booleans, numbers, strings grouped apart
    if v is None:
        return (9, 0)
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, (int, float)):
        return (2, v)
    return (3, v)


def cmp3(op, a, b):
    if a is None or b is None:
        return None
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        eq = abs(a - b) <= 1e-9
        return {"=": eq, "<>": not eq, "<": a < b and not eq, "<=": a < b or eq,
                ">": a > b and not eq, ">=": a > b or eq}[op]
    return {"=": a == b, "<>": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]


def and3(*vals):
    if any(v is False for v in vals):
        return False
    return None if any(v is None for v in vals) else True


def or3(*vals):
    if any(v is True for v in vals):
        return True
    return None if any(v is None for v in vals) else False


def not3(v):
    return None if v is None else not v


def agg(func, vals):
    present = [v for v in vals if v is not None]
    if func == "COUNT":
        return len(present)
    if func == "SUM" and not present:
        return 0  # Cypher convention: the empty sum is zero
    if not present:
        return None
    if func == "SUM":
        return sum(present) if all(isinstance(v, int) for v in present) else math.fsum(present)
    if func == "AVG":
        return math.fsum(present) / len(present)
    return max(present) if func == "MAX" else min(present)


def order_rows(rows, keys, desc, limit=None):
    """Rows sorted by full tuple, then stably by each ORDER BY key from last to first."""
    entries = sorted(zip(rows, keys), key=lambda e: tuple(sk(v) for v in e[0]))
    for pos in range(len(desc) - 1, -1, -1):
        entries.sort(key=lambda e, p=pos: sk(e[1][p]), reverse=desc[pos])
    out = [r for r, _ in entries]
    return out[:limit] if limit is not None else out


# --- graph access -----------------------------------------------------------------


class G:
    def __init__(self, doc):
        self.nodes = {n["id"]: n for n in doc["nodes"]}
        self.edges = [dict(e, index=i) for i, e in enumerate(doc["edges"])]

    def of(self, t):
        return [n for n in self.nodes.values() if n["type"] == t]

    def edges_of(self, t):
        return [e for e in self.edges if e["type"] == t]

    def p(self, node_id, key):
        return self.nodes[node_id]["props"].get(key)


def names_in(g):
    return sorted({n["props"]["name"] for n in g.of("person")})


# --- template families --------------------------------------------------------------
# Each builder returns (query text, expected rows, ordered flag).


def t_attribute(g, rng):
    name = rng.choice(names_in(g) + ["Nobody"])
    q = f"MATCH (a:person) WHERE a.name = '{name}' RETURN a.age, a.score"
    rows = [(a["props"].get("age"), a["props"].get("score"))
            for a in g.of("person") if cmp3("=", a["props"]["name"], name) is True]
    return q, rows, False


def t_temporal(g, rng):
    d = rng.choice(DATES)
    op = rng.choice([">=", "<", "="])
    q = f"MATCH (a:person)-[e:lives_in]->(c:city) WHERE e.since {op} '{d}' RETURN a.name, c.name, e.since"
    rows = []
    for e in g.edges_of("lives_in"):
        if cmp3(op, e["props"].get("since"), d) is True:
            rows.append((g.p(e["src"], "name"), g.p(e["dst"], "name"), e["props"].get("since")))
    return q, rows, False


def t_neighbors(g, rng):
    name = rng.choice(names_in(g))
    q = f"MATCH (a:person {{name: '{name}'}})-[:knows]->(b:person) RETURN b.name"
    rows = [(g.p(e["dst"], "name"),) for e in g.edges_of("knows") if g.p(e["src"], "name") == name]
    return q, rows, False


def t_two_hop(g, rng):
    name = rng.choice(names_in(g))
    q = (f"MATCH (a:person)-[:knows]->(b:person)-[:knows]->(c:person) WHERE a.name = '{name}' "
         "RETURN DISTINCT c.name ORDER BY c.name")
    found = set()
    knows = g.edges_of("knows")
    for e1, e2 in itertools.product(knows, knows):
        if e1["index"] == e2["index"] or e1["dst"] != e2["src"]:
            continue
        if g.p(e1["src"], "name") == name:
            found.add(g.p(e2["dst"], "name"))
    rows = [(v,) for v in found]
    return q, order_rows(rows, rows, [False]), True


def t_incoming(g, rng):
    city = rng.choice(CITIES)
    q = (f"MATCH (c:city)<-[:lives_in]-(a:person) WHERE c.name = '{city}' "
         "RETURN a.name, a.age ORDER BY a.age DESC")
    rows, keys = [], []
    for e in g.edges_of("lives_in"):
        if g.p(e["dst"], "name") == city:
            rows.append((g.p(e["src"], "name"), g.p(e["src"], "age")))
            keys.append((g.p(e["src"], "age"),))
    return q, order_rows(rows, keys, [True]), True


def t_compare(g, rng):
    x, y = rng.choice(names_in(g)), rng.choice(names_in(g))
    op = rng.choice([">", "<=", "<>"])
    q = (f"MATCH (a:person), (b:person) WHERE a.name = '{x}' AND b.name = '{y}' AND a.score {op} b.score "
         "RETURN a.name, b.name, a.score")
    rows = []
    for a, b in itertools.product(g.of("person"), g.of("person")):
        ok = and3(cmp3("=", a["props"]["name"], x), cmp3("=", b["props"]["name"], y),
                  cmp3(op, a["props"].get("score"), b["props"].get("score")))
        if ok is True:
            rows.append((x, y, a["props"].get("score")))
    return q, rows, False


def t_group_agg(g, rng):
    func = rng.choice(["COUNT", "SUM", "AVG", "MAX", "MIN"])
    prop = rng.choice(["age", "score"])
    q = f"MATCH (a:person)-[:lives_in]->(c:city) RETURN c.name, {func}(a.{prop}) ORDER BY c.name"
    groups = {}
    for e in g.edges_of("lives_in"):
        groups.setdefault(g.p(e["dst"], "name"), []).append(g.p(e["src"], prop))
    rows = [(k, agg(func, v)) for k, v in groups.items()]
    return q, order_rows(rows, [(r[0],) for r in rows], [False]), True


def t_global_agg(g, rng):
    m = rng.randint(18, 70)
    func = rng.choice(["COUNT(*)", "AVG(b.score)", "MAX(b.age)", "COUNT(DISTINCT b.name)"])
    q = f"MATCH (a:person)-[:knows]->(b:person) WHERE b.age > {m} RETURN {func}"
    members = [e["dst"] for e in g.edges_of("knows") if cmp3(">", g.p(e["dst"], "age"), m) is True]
    if func == "COUNT(*)":
        value = len(members)
    elif func == "AVG(b.score)":
        value = agg("AVG", [g.p(b, "score") for b in members])
    elif func == "MAX(b.age)":
        value = agg("MAX", [g.p(b, "age") for b in members])
    else:
        value = len({g.p(b, "name") for b in members})
    return q, [(value,)], False


def t_conditional(g, rng):
    name = rng.choice(names_in(g))
    m = rng.randint(18, 70)
    limit = rng.randint(1, 4)
    q = (f"MATCH (a:person)-[k:knows]->(b:person) WHERE a.name = '{name}' AND (b.age >= {m} OR NOT b.active) "
         f"RETURN b.name, k.weight ORDER BY k.weight LIMIT {limit}")
    rows, keys = [], []
    for e in g.edges_of("knows"):
        b = e["dst"]
        ok = and3(cmp3("=", g.p(e["src"], "name"), name),
                  or3(cmp3(">=", g.p(b, "age"), m), not3(g.p(b, "active"))))
        if ok is True:
            rows.append((g.p(b, "name"), e["props"].get("weight")))
            keys.append((e["props"].get("weight"),))
    return q, order_rows(rows, keys, [False], limit), True


def t_top(g, rng):
    prop = rng.choice(["score", "age"])
    desc = rng.random() < 0.5
    q = f"MATCH (a:person) RETURN a.name ORDER BY a.{prop}{' DESC' if desc else ''} LIMIT 1"
    people = g.of("person")
    rows = [(a["props"]["name"],) for a in people]
    keys = [(a["props"].get(prop),) for a in people]
    return q, order_rows(rows, keys, [desc], 1), True


TEMPLATES = [t_attribute, t_temporal, t_neighbors, t_two_hop, t_incoming, t_compare,
             t_group_agg, t_global_agg, t_conditional, t_top]


def rows_agree(got, want, ordered):
    if len(got) != len(want):
        return False
    if not ordered:
        got = sorted(got, key=lambda r: tuple(sk(v) for v in r))
        want = sorted(want, key=lambda r: tuple(sk(v) for v in r))
    for r1, r2 in zip(got, want):
        if len(r1) != len(r2):
            return False
        for a, b in zip(r1, r2):
            if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
                if abs(a - b) > 1e-9:
                    return False
            elif a != b or type(a) is not type(b):
                return False
    return True


def cases(count, seed=0):
    """Yield (graph doc, template name, query, expected rows, ordered)."""
    rng = random.Random(seed)
    for i in range(count):
        doc = random_graph(rng)
        tmpl = TEMPLATES[i % len(TEMPLATES)]
        q, rows, ordered = tmpl(G(doc), rng)
        yield doc, tmpl.__name__, q, rows, ordered
