"""Command-line entry point: forge generate | filter | evaluate | infer | stats."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import fixtures
from .da_baseline import InferenceConfig, infer_dataset
from .dialogue import compute_stats, read_dataset, write_dataset
from .errors import GqlForgeError
from .evaluation import analyze_dataset, compute_metrics, format_report, read_predictions, write_predictions
from .forge import ForgeConfig, Generators, generate_dataset
from .graph_store import load_graph, load_schema
from .quality import QualityConfig, RemoteEmbedder, TrigramEmbedder, filter_embedding, filter_masked_gql
from .text_gen import EndpointConfig, MockGenerator, RemoteChatGenerator
from .text_gen.mock import FaultConfig

log = logging.getLogger("gqlforge")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    schema: str | None = None
    graph: str | None = None
    dataset: str | None = None
    predictions: str | None = None
    output: str | None = None
    rounds_min: int = 5
    rounds_max: int = 8
    retry_budget: int = 3
    seed: int = 0
    worker_count: int = 1
    tau_sem: float = 0.8
    dedup_threshold: float = 0.6
    masked_overlap_limit: int = 3
    repair_attempts: int = 3
    masked_mode: str = "pairwise"
    generator: str = "mock"
    embedder: str = "fallback"
    endpoint: dict = field(default_factory=dict)
    embedding_model: str | None = None

    def check(self):
        if not 1 <= self.rounds_min <= self.rounds_max:
            raise UsageError("rounds_min must be at least 1 and not exceed rounds_max")
        for name in ("tau_sem", "dedup_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise UsageError(f"{name} must lie in [0, 1]")
        if self.worker_count < 1:
            raise UsageError("worker_count must be at least 1")
        if self.generator not in ("mock", "remote") or self.embedder not in ("fallback", "remote"):
            raise UsageError("generator is mock|remote and embedder is fallback|remote")
        if self.masked_mode not in ("pairwise", "global"):
            raise UsageError("masked_mode is pairwise|global")
        if "api_key" in self.endpoint:
            raise UsageError("put the API key in the environment variable named by endpoint.api_key_env")

    def forge_config(self) -> ForgeConfig:
        return ForgeConfig(self.rounds_min, self.rounds_max, self.retry_budget, self.seed, self.worker_count)

    def quality_config(self) -> QualityConfig:
        return QualityConfig(self.tau_sem, self.dedup_threshold, self.masked_overlap_limit, self.repair_attempts,
                             masked_mode=self.masked_mode)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    doc = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**doc)
    cfg.check()
    return cfg


def _graph(cfg: RunConfig):
    schema_path = cfg.schema or fixtures.schema_path()
    graph_path = cfg.graph or fixtures.graph_path()
    schema = load_schema(schema_path)
    return load_graph(schema, graph_path)


def _generator(cfg: RunConfig, graph, mock: bool, faults: FaultConfig | None = None):
    if mock or cfg.generator == "mock":
        return MockGenerator.for_graph(graph, faults=faults)
    if not cfg.endpoint.get("base_url") or not cfg.endpoint.get("model"):
        raise UsageError("remote generation needs endpoint.base_url and endpoint.model in the config")
    return RemoteChatGenerator(EndpointConfig.from_dict(cfg.endpoint))


def _embedder(cfg: RunConfig, mock: bool):
    if mock or cfg.embedder == "fallback":
        return TrigramEmbedder()
    if not cfg.endpoint.get("base_url") or not cfg.embedding_model:
        raise UsageError("the remote embedder needs endpoint.base_url and embedding_model")
    gen = RemoteChatGenerator(EndpointConfig.from_dict(cfg.endpoint))
    return RemoteEmbedder(gen.client, cfg.embedding_model)


def _require(value, flag: str):
    if not value:
        raise UsageError(f"{flag} is required")
    return value


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --- subcommands ----------------------------------------------------------------------


def cmd_generate(args, cfg: RunConfig) -> int:
    out = _require(args.out or cfg.output, "--out")
    graph = _graph(cfg)
    faults = FaultConfig(kind=args.fault_kind, rate=args.fault_rate) if args.fault_rate else None
    gen = _generator(cfg, graph, args.mock, faults)
    validator = _generator(cfg, graph, args.mock)
    gens = Generators(gen, gen, validator, _embedder(cfg, args.mock))
    result = generate_dataset(args.count, graph.schema, graph, gens, cfg.forge_config(), cfg.quality_config())
    write_dataset(result.dialogues, out)
    print(f"wrote {len(result.dialogues)} dialogues to {out} ({len(result.abandoned)} abandoned)",
          file=sys.stderr)
    return 0 if len(result.dialogues) == args.count else 1


def cmd_filter(args, cfg: RunConfig) -> int:
    path = _require(args.dataset or cfg.dataset, "--dataset")
    graph = _graph(cfg)
    data = read_dataset(path)
    q = cfg.quality_config()
    masked = filter_masked_gql(data, graph.schema, q.masked_overlap_limit, q.masked_mode)
    survivors = masked.apply(data)
    emb = filter_embedding(survivors, _embedder(cfg, args.mock), q.dedup_threshold)
    kept = emb.apply(survivors)
    report = {
        "input": len(data),
        "kept": [d.id for d in kept],
        "masked_gql": masked.to_dict()["discarded"],
        "embedding": emb.to_dict()["discarded"],
    }
    out = args.out or cfg.output
    if out:
        write_dataset(kept, out)
    _emit(report, args.report)
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    gold = read_dataset(_require(args.gold or cfg.dataset, "--gold"), check=False)
    preds = read_predictions(_require(args.pred or cfg.predictions, "--pred"))
    graph = _graph(cfg)
    report = compute_metrics(preds, gold, graph)
    breakdown = "both" if args.breakdown == "all" else args.breakdown
    if args.json:
        _emit(report.to_dict(breakdown), args.report)
    else:
        print(format_report(report, breakdown))
        if args.report:
            _emit(report.to_dict(breakdown), args.report)
    return 0


def cmd_infer(args, cfg: RunConfig) -> int:
    gold = read_dataset(_require(args.gold or cfg.dataset, "--gold"), check=False)
    out = _require(args.out or cfg.predictions, "--out")
    graph = _graph(cfg)
    gen = _generator(cfg, graph, args.mock)
    config = InferenceConfig(alignment="shape" if (args.mock or cfg.generator == "mock") else "reverse",
                             tau_sem=cfg.tau_sem)
    preds = infer_dataset(gold, graph, gen, config, cfg.seed)
    write_predictions(preds, out)
    print(f"wrote {len(preds.by_key)} predictions to {out}", file=sys.stderr)
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    data = read_dataset(_require(args.dataset or cfg.dataset, "--dataset"), check=False)
    graph = _graph(cfg)
    doc = {"stats": compute_stats(data).to_dict(), "analytics": analyze_dataset(data, graph.schema).to_dict()}
    _emit(doc, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--schema", help="schema JSON (default: bundled fixture)")
    common.add_argument("--graph", help="graph JSON (default: bundled fixture)")
    common.add_argument("--seed", type=int)
    common.add_argument("--mock", action="store_true", help="offline mock generator and fallback embedder")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="forge dialogues to JSONL")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, dest="worker_count")
    p.add_argument("--rounds-min", type=int, dest="rounds_min")
    p.add_argument("--rounds-max", type=int, dest="rounds_max")
    p.add_argument("--fault-rate", type=float, default=0.0, help="mock only: share of GQL replies to corrupt")
    p.add_argument("--fault-kind", default="syntax", choices=["syntax", "semantic", "permanent"])
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("filter", parents=[common], help="de-duplicate a dataset")
    p.add_argument("--dataset")
    p.add_argument("--out", help="write the kept dialogues here")
    p.add_argument("--report", help="write the filter report here (default: stdout)")
    p.add_argument("--threshold", type=float, dest="dedup_threshold")
    p.add_argument("--limit", type=int, dest="masked_overlap_limit")
    p.add_argument("--mode", choices=["pairwise", "global"], dest="masked_mode")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--breakdown", choices=["round", "pattern", "none", "all"], default="all")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the table")
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", parents=[common], help="dependency-aware inference over a gold dataset")
    p.add_argument("--gold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics and keyword analytics")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


_OVERRIDES = ("schema", "graph", "seed", "worker_count", "rounds_min", "rounds_max", "dedup_threshold",
              "masked_overlap_limit", "masked_mode")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    try:
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"forge: usage error: {exc}", file=sys.stderr)
        return 2
    except (GqlForgeError, OSError) as exc:
        print(f"forge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
