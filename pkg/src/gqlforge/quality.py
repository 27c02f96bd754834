"""Query validation and repair, embedders, and dataset de-duplication filters."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .dialogue import Dialogue
from .errors import GqlForgeError, MalformedResponseError, ParseError, QueryError, TransportError
from .gql import ResultTable, execute, mask_entities, parse
from .text_gen.prompts import PromptKind, build_prompt

DIM = 384


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


def _bin(gram: str) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % DIM


def fallback_embed(text: str) -> np.ndarray:
    """Hashed character trigrams of the lower-cased, space-padded text, L2-normalized."""
    vec = np.zeros(DIM)
    norm_text = " ".join(text.lower().split())
    if not norm_text:
        return vec
    padded = f" {norm_text} "
    for i in range(len(padded) - 2):
        vec[_bin(padded[i:i + 3])] += 1.0
    return vec / np.linalg.norm(vec)


class TrigramEmbedder:
    def embed(self, text: str) -> np.ndarray:
        return fallback_embed(text)


class RemoteEmbedder:
    """Embeddings endpoint: POST {model, input} -> {data: [{embedding}]}."""

    def __init__(self, client, model: str, path: str = "/embeddings"):
        self.client = client
        self.model = model
        self.path = path

    def embed(self, text: str) -> np.ndarray:
        doc = self.client.post_json(self.path, {"model": self.model, "input": text})
        try:
            vec = np.asarray(doc["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("response has no data[0].embedding") from exc
        if vec.shape != (DIM,):
            raise MalformedResponseError(f"expected a {DIM}-dimensional embedding, got {vec.shape}")
        n = np.linalg.norm(vec)
        return vec / n if n else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# --- validator and optimizer ---------------------------------------------------------


@dataclass
class QualityConfig:
    tau_sem: float = 0.8
    dedup_threshold: float = 0.6
    masked_overlap_limit: int = 3
    repair_attempts: int = 3
    require_nonempty: bool = True
    masked_mode: str = "pairwise"


@dataclass(frozen=True)
class Accepted:
    gql: str
    result: ResultTable
    attempts: int = 0


@dataclass(frozen=True)
class Repaired:
    gql: str
    attempts: int
    result: ResultTable


@dataclass(frozen=True)
class RegenerateQuestion:
    reason: str
    attempts: int = 0
    log: tuple = ()


ValidationOutcome = Accepted | Repaired | RegenerateQuestion

GENERATOR_UNAVAILABLE = "GeneratorUnavailable"


def _has_value(table: ResultTable) -> bool:
    return any(v is not None and v != [] for row in table.rows for v in row)


def syntax_check(gql: str, graph, require_nonempty: bool) -> tuple[ResultTable | None, str | None]:
    """(result, None) when the query parses and runs, else (None, error text)."""
    try:
        table = execute(parse(gql), graph)
    except QueryError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    if require_nonempty and not _has_value(table):
        return None, "empty result: the query returns no data on the graph"
    return table, None


def validate_and_optimize(question: str, gql: str, graph, generator, embedder=None,
                          config: QualityConfig | None = None, seed=0) -> ValidationOutcome:
    """Syntax validation, then reverse-generation semantic validation.

    Both loops draw on one repair budget of ``config.repair_attempts`` calls,
    so the attempts reported by Repaired never exceed it.
    """
    config = config or QualityConfig()
    embedder = embedder or TrigramEmbedder()
    schema = graph.schema
    attempts = 0
    log: list[str] = []
    try:
        while True:
            table, error = syntax_check(gql, graph, config.require_nonempty)
            if error is None:
                similarity = _reverse_similarity(question, gql, schema, generator, embedder, seed)
                if similarity >= config.tau_sem:
                    if attempts == 0:
                        return Accepted(gql, table)
                    return Repaired(gql, attempts, table)
                error = f"semantic mismatch: reverse-generated question has similarity {similarity:.3f}"
            log.append(error)
            if attempts >= config.repair_attempts:
                return RegenerateQuestion(f"validation failed after {attempts} repairs: {error}", attempts,
                                          tuple(log))
            attempts += 1
            prompt = build_prompt(PromptKind.REPAIR, schema, question=question, gql=gql, error=error)
            gql = generator.generate(prompt, f"{seed}:repair:{attempts}").text.strip()
    except (TransportError, MalformedResponseError) as exc:
        return RegenerateQuestion(GENERATOR_UNAVAILABLE, attempts, tuple(log + [str(exc)]))


def _reverse_similarity(question, gql, schema, generator, embedder, seed) -> float:
    prompt = build_prompt(PromptKind.REVERSE, schema, gql=gql)
    inferred = generator.generate(prompt, f"{seed}:reverse").text
    return cosine(embedder.embed(inferred), embedder.embed(question))


# --- dataset filters ----------------------------------------------------------------------


@dataclass(frozen=True)
class MaskedGqlOverlap:
    partner: str
    count: int


@dataclass(frozen=True)
class EmbeddingSimilarity:
    partner: str
    cosine: float


@dataclass
class FilterReport:
    kept: list[str] = field(default_factory=list)
    discarded: dict = field(default_factory=dict)  # id -> reason

    def to_dict(self) -> dict:
        out = {}
        for did, reason in self.discarded.items():
            if isinstance(reason, MaskedGqlOverlap):
                out[did] = {"reason": "MaskedGqlOverlap", "partner": reason.partner, "count": reason.count}
            else:
                out[did] = {"reason": "EmbeddingSimilarity", "partner": reason.partner,
                            "cosine": round(reason.cosine, 6)}
        return {"kept": list(self.kept), "discarded": out}

    def apply(self, dataset: Sequence[Dialogue]) -> list[Dialogue]:
        keep = set(self.kept)
        return [d for d in dataset if d.id in keep]


def _in_id_order(dataset: Sequence[Dialogue]) -> list[Dialogue]:
    return sorted(dataset, key=lambda d: d.id)


def masked_templates(d: Dialogue, schema) -> set[str]:
    out = set()
    for t in d.turns:
        try:
            out.add(mask_entities(parse(t.gql), schema))
        except GqlForgeError as exc:
            raise ParseError(f"dialogue {d.id} round {t.round}: {exc}") from exc
    return out


def filter_masked_gql(dataset: Sequence[Dialogue], schema, limit: int = 3, mode: str = "pairwise") -> FilterReport:
    """Drop a dialogue sharing more than ``limit`` masked templates with a kept one.

    ``mode="global"`` instead caps each template at ``limit`` kept dialogues.
    """
    if mode not in ("pairwise", "global"):
        raise ValueError("mode must be 'pairwise' or 'global'")
    report = FilterReport()
    kept: list[tuple[str, set[str]]] = []
    usage: Counter = Counter()
    owner: dict[str, str] = {}
    for d in _in_id_order(dataset):
        templates = masked_templates(d, schema)
        reason = None
        if mode == "pairwise":
            for kid, ktemps in kept:
                shared = len(templates & ktemps)
                if shared > limit:
                    reason = MaskedGqlOverlap(kid, shared)
                    break
        else:
            over = sorted(t for t in templates if usage[t] >= limit)
            if over:
                reason = MaskedGqlOverlap(owner[over[0]], usage[over[0]] + 1)
        if reason is None:
            report.kept.append(d.id)
            kept.append((d.id, templates))
            for t in templates:
                usage[t] += 1
                owner.setdefault(t, d.id)
        else:
            report.discarded[d.id] = reason
    return report


def dialogue_text(d: Dialogue) -> str:
    return " ".join(t.question_complete for t in sorted(d.turns, key=lambda t: t.round))


def filter_embedding(dataset: Sequence[Dialogue], embedder=None, threshold: float = 0.6) -> FilterReport:
    """Drop a dialogue whose question text is more than ``threshold`` cosine-similar to a kept one."""
    embedder = embedder or TrigramEmbedder()
    report = FilterReport()
    kept_ids: list[str] = []
    kept_vecs: list[np.ndarray] = []
    for d in _in_id_order(dataset):
        vec = embedder.embed(dialogue_text(d))
        reason = None
        if kept_vecs:
            sims = np.array([cosine(vec, k) for k in kept_vecs])
            over = np.nonzero(sims > threshold)[0]
            if over.size:
                i = int(over[0])
                reason = EmbeddingSimilarity(kept_ids[i], float(sims[i]))
        if reason is None:
            report.kept.append(d.id)
            kept_ids.append(d.id)
            kept_vecs.append(vec)
        else:
            report.discarded[d.id] = reason
    return report
