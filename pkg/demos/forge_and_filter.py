"""Forge dialogues over a synthetic market graph with the offline mock, then de-duplicate them.

Run: python demos/forge_and_filter.py --count 40 --seed 7
"""

import argparse

from gqlforge.dialogue import compute_stats
from gqlforge.evaluation import analyze_dataset
from gqlforge.fixtures import market_graph
from gqlforge.forge import ForgeConfig, Generators, generate_dataset
from gqlforge.quality import filter_embedding, filter_masked_gql
from gqlforge.text_gen import FaultConfig, MockGenerator


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=40)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--fault-rate", type=float, default=0.2, help="share of GQL replies to misspell")
    args = parser.parse_args()

    graph = market_graph(seed=args.seed)
    clean = MockGenerator.for_graph(graph)
    faulty = MockGenerator.for_graph(graph, faults=FaultConfig("syntax", rate=args.fault_rate))
    result = generate_dataset(args.count, graph.schema, graph, Generators(faulty, faulty, clean),
                              ForgeConfig(seed=args.seed))
    data = result.dialogues
    print(f"forged {len(data)} dialogues, abandoned {len(result.abandoned)} attempts")

    first = data[0]
    print(f"\n{first.id}:")
    for t in first.turns:
        tag = t.pattern.value if t.pattern else "open"
        print(f"  [{tag}] {t.question_raw}")
        print(f"       {t.gql}")
        print(f"       -> {list(t.answer)[:4]}")

    masked = filter_masked_gql(data, graph.schema)
    survivors = masked.apply(data)
    emb = filter_embedding(survivors)
    kept = emb.apply(survivors)
    print(f"\nmasked-template filter dropped {len(masked.discarded)}, embedding filter dropped "
          f"{len(emb.discarded)}, kept {len(kept)}")

    stats = compute_stats(kept)
    analytics = analyze_dataset(kept, graph.schema)
    print(f"avg turns {stats.avg_turns:.2f}, queries {stats.total_gqls}, "
          f"informative keywords per query {analytics.avg_informative:.2f}")
    for name, n in sorted(analytics.query_types.items(), key=lambda kv: -kv[1]):
        if n:
            print(f"  {name:<24}{n:>5}")


if __name__ == "__main__":
    main()
