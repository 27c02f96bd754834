"""Replay the bundled four-turn dialogue through the dependency-aware baseline and score it.

Run: python demos/replay_and_score.py
"""

from gqlforge.da_baseline import infer_dialogue
from gqlforge.evaluation import PredictionSet, compute_metrics, format_report
from gqlforge.fixtures import fixture_graph, golden_dialogue
from gqlforge.text_gen import MockGenerator


def main():
    graph = fixture_graph()
    gold = golden_dialogue()
    gen = MockGenerator.for_graph(graph)

    results = infer_dialogue([t.question_raw for t in gold.turns], graph, graph.schema, gen)
    preds = PredictionSet()
    for t, (gql, trace) in zip(gold.turns, results):
        preds.add(gold.id, t.round, gql)
        print(f"round {t.round}: {t.question_raw!r}")
        print(f"  explicit : {trace.explicit_question}")
        print(f"  subschema: {', '.join(trace.subschema)}")
        print(f"  aligned  : {trace.aligned} (refines {trace.refines})")
        print(f"  query    : {gql}")

    print()
    print(format_report(compute_metrics(preds, [gold], graph)))


if __name__ == "__main__":
    main()
