import random
from fractions import Fraction

import pytest

from gqlforge.dialogue import Pattern, check_dialogue, dumps_dialogue, interdependent
from gqlforge.errors import DialogueAbandoned, NoApplicablePattern, UnboundPlaceholder
from gqlforge.fixtures import golden_dialogue
from gqlforge.forge import (
    ForgeConfig,
    Generators,
    PatternChoice,
    SessionState,
    applicable_patterns,
    fulfill_placeholders,
    generate_dataset,
    new_session,
    run_dialogue,
    select_pattern,
    update_pattern_weights,
    weighted_argmax,
)
from gqlforge.gql import run
from gqlforge.graph_store import graph_from_dict, schema_from_dict
from gqlforge.text_gen import FaultConfig, MockGenerator

SIXTH = Fraction(1, 6)


def mock_generators(graph, faults=None):
    clean = MockGenerator.for_graph(graph)
    faulty = MockGenerator.for_graph(graph, faults=faults) if faults else clean
    return Generators(clean, faulty, clean)


def state_after(turns, graph, seed=0):
    state = SessionState(seed=seed)
    for t in turns:
        state.record(t, graph)
    return state


# --- sessions and weights ------------------------------------------------------------------


def test_new_session_is_uniform_and_deterministic(schema, graph):
    s = new_session(schema, graph, seed=11)
    assert s.pattern_weights == {p: SIXTH for p in Pattern}
    assert s == new_session(schema, graph, seed=11)
    assert s.history == [] and s.pattern_history == []


def test_target_rounds_cover_the_range(schema, graph):
    seen = {new_session(schema, graph, seed=s).target_rounds for s in range(1000)}
    assert seen == {5, 6, 7, 8}


def test_halving_arithmetic():
    w = update_pattern_weights({p: SIXTH for p in Pattern}, Pattern.P1)
    assert w[Pattern.P1] == Fraction(1, 12)
    assert all(w[p] == Fraction(11, 60) for p in Pattern if p is not Pattern.P1)
    assert sum(w.values()) == 1


def test_repeated_selection_keeps_shrinking():
    w = {p: SIXTH for p in Pattern}
    last = w[Pattern.P3]
    for _ in range(5):
        w = update_pattern_weights(w, Pattern.P3)
        assert w[Pattern.P3] < last
        last = w[Pattern.P3]
        assert sum(w.values()) == 1 and min(w.values()) > 0


def test_random_sequences_conserve_mass():
    rng = random.Random(5)
    for _ in range(50):
        w = {p: SIXTH for p in Pattern}
        for _ in range(100):
            w = update_pattern_weights(w, rng.choice(list(Pattern)))
        assert abs(float(sum(w.values())) - 1) < 1e-9


def test_weighted_argmax_rules():
    assert weighted_argmax(["b", "a", "c"], set()) == "a"  # ties by id
    assert weighted_argmax(["a", "b", "c"], {"c"}) == "c"
    assert weighted_argmax(["only"], {"other"}) == "only"
    assert weighted_argmax(["a", "b"], {"a", "b"}) == "a"


# --- applicability and selection -------------------------------------------------------------


def test_applicability_on_the_fixture(graph, schema):
    state = state_after(golden_dialogue().turns[:2], graph)
    found = applicable_patterns(state, schema, graph)
    assert {Pattern.P1, Pattern.P2, Pattern.P4} <= found
    assert Pattern.P6 not in found  # the last answer is a single value


def test_no_numeric_scope_excludes_aggregation():
    doc = {"node_types": [
        {"name": "author", "properties": [{"name": "name", "kind": "string"}],
         "placeholder": {"token": "[p]", "bound_property": "name"}},
        {"name": "city", "properties": [{"name": "name", "kind": "string"}],
         "placeholder": {"token": "[c]", "bound_property": "name"}}],
        "edge_types": [{"name": "born_in", "source": "author", "target": "city", "properties": []}]}
    schema = schema_from_dict(doc)
    graph = graph_from_dict(schema, {"nodes": [
        {"id": "a1", "type": "author", "props": {"name": "Ann"}},
        {"id": "a2", "type": "author", "props": {"name": "Bo"}},
        {"id": "c1", "type": "city", "props": {"name": "Oslo"}}],
        "edges": [{"src": "a1", "type": "born_in", "dst": "c1", "props": {}}]})
    from gqlforge.dialogue import Turn
    first = Turn(1, "Who?", "What is the name of Ann?", "MATCH (v1:author {name: 'Ann'}) RETURN v1.name",
                 ("Ann",), None, ("a1",), ())
    found = applicable_patterns(state_after([first], graph), schema, graph)
    assert Pattern.P5 not in found and Pattern.P2 not in found
    assert {Pattern.P3, Pattern.P4} <= found


def test_select_from_fresh_weights(graph, schema):
    state = state_after(golden_dialogue().turns[:1], graph)
    applicable = applicable_patterns(state, schema, graph)
    choice, after = select_pattern(state, schema, graph)
    first = min(applicable, key=lambda p: p.index)
    assert choice.pattern is first
    assert after.pattern_weights[first] == Fraction(1, 12)
    assert state.pattern_weights[first] == SIXTH  # input state untouched
    choice2, _ = select_pattern(after, schema, graph)
    # the others now hold 11/60 each, so the next lowest applicable index wins
    assert choice2.pattern is min(applicable - {first}, key=lambda p: p.index)


def test_selection_needs_history(graph, schema):
    with pytest.raises(NoApplicablePattern):
        select_pattern(SessionState(), schema, graph)


# --- placeholders ------------------------------------------------------------------------------


def test_fill_chosen_entity(graph):
    choice = PatternChoice(Pattern.P1, ("stock:600030",), ())
    text, bindings, _ = fulfill_placeholders("What is the opening price of [s]?", choice, SessionState(), graph, 0)
    assert text == "What is the opening price of CITIC Securities?"
    assert bindings == {"[s]": "CITIC Securities"}


def test_fill_without_placeholders(graph):
    text, bindings, extras = fulfill_placeholders("How are markets?", None, SessionState(), graph, 0, ("x",))
    assert (text, bindings, extras) == ("How are markets?", {}, ("x",))


def test_fill_unknown_token(graph):
    with pytest.raises(UnboundPlaceholder) as err:
        fulfill_placeholders("Who manages [f]?", None, SessionState(), graph, 0)
    assert err.value.token == "[f]"


def test_temporal_shift_prefers_previous_day(graph):
    state = state_after(golden_dialogue().turns[:2], graph)  # last turn asks about 2025-01-08
    choice = PatternChoice(Pattern.P2, ("stock:600030",), ("has_data",))
    text, bindings, _ = fulfill_placeholders("What is the opening price of [s] on [d]?", choice, state, graph, 3)
    assert bindings["[d]"] == "2025-01-07"
    same = PatternChoice(Pattern.P4, ("stock:601211",), ())
    _, bindings, _ = fulfill_placeholders("What is the opening price of [s] on [d]?", same, state, graph, 3)
    assert bindings == {"[s]": "Guotai Junan Securities", "[d]": "2025-01-08"}


def test_number_is_median_of_named_property(graph):
    choice = PatternChoice(Pattern.P6, ("stock:600030",), ("has_data",))
    text, bindings, _ = fulfill_placeholders(
        "Which stock data records linked to [s] through has data have volume of at least [m]?",
        choice, SessionState(), graph, 0)
    volumes = sorted(graph.nodes[o].props["volume"] for e, o in graph.neighbors("stock:600030")
                     if e.type == "has_data")
    assert bindings["[m]"] == volumes[(len(volumes) - 1) // 2]
    assert "[m]" not in text


# --- the loop ----------------------------------------------------------------------------------


def test_run_dialogue_seed_42(schema, graph):
    session = new_session(schema, graph, seed=42)
    d = run_dialogue(session, schema, graph, mock_generators(graph))
    assert len(d.turns) == session.target_rounds
    check_dialogue(d)
    assert interdependent(d)
    for t in d.turns:
        assert tuple(run(t.gql, graph).values()) == t.answer


def test_repairable_fault_on_round_3(schema, graph):
    gens = mock_generators(graph, FaultConfig("syntax", rounds=(3,)))
    d = run_dialogue(new_session(schema, graph, seed=42), schema, graph, gens)
    clean = run_dialogue(new_session(schema, graph, seed=42), schema, graph, mock_generators(graph))
    assert len(d.turns) == len(clean.turns)
    assert d.turns[2].gql == clean.turns[2].gql


def test_permanent_fault_abandons(schema, graph):
    gens = mock_generators(graph, FaultConfig("permanent", rounds=(2,)))
    with pytest.raises(DialogueAbandoned) as err:
        run_dialogue(new_session(schema, graph, seed=42), schema, graph, gens)
    assert err.value.round_number == 2 and len(err.value.reasons) == 3


def test_batch_reports_abandoned(schema, graph):
    gens = mock_generators(graph, FaultConfig("permanent", rounds=(1,)))
    result = generate_dataset(2, schema, graph, gens, ForgeConfig(seed=1), max_tries_factor=2)
    assert result.dialogues == [] and len(result.abandoned) == 4


def test_dataset_is_deterministic_across_workers(schema, graph):
    one = generate_dataset(6, schema, graph, mock_generators(graph), ForgeConfig(seed=9, worker_count=1))
    four = generate_dataset(6, schema, graph, mock_generators(graph), ForgeConfig(seed=9, worker_count=4))
    assert [dumps_dialogue(d) for d in one.dialogues] == [dumps_dialogue(d) for d in four.dialogues]
    assert [d.id for d in one.dialogues] == [f"d{i:05d}" for i in range(6)]


def test_rounds_respect_config(schema, graph):
    cfg = ForgeConfig(rounds_min=6, rounds_max=6, seed=2)
    result = generate_dataset(3, schema, graph, mock_generators(graph), cfg)
    assert {len(d.turns) for d in result.dialogues} == {6}
