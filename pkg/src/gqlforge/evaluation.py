"""EM / AEM / EX / AEX scoring with round and pattern breakdowns, plus dataset analytics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .dialogue import INITIAL, Dialogue
from .errors import AlignmentError, GoldExecutionError, GoldParseError, GqlForgeError, ParseError
from .gql import classify_query_type, count_keywords, execute, parse, print_canonical, tables_equal
from .gql.analysis import ALL_KEYWORDS, QueryType

ROUND_BUCKETS = ("R1", "R2", "R3", "R4", "R5+")


def round_bucket(round_no: int) -> str:
    return f"R{round_no}" if round_no < 5 else "R5+"


def _canonical_or_none(text: str) -> str | None:
    try:
        return print_canonical(parse(text))
    except GqlForgeError:
        return None


def exact_match(pred: str | None, gold: str) -> bool:
    try:
        gold_form = print_canonical(parse(gold))
    except GqlForgeError as exc:
        raise GoldParseError(f"gold query does not parse: {exc}") from exc
    if pred is None:
        return False
    return _canonical_or_none(pred) == gold_form


def execution_match(pred: str | None, gold: str, graph) -> bool:
    """Ordered comparison when the gold query sorts, multiset comparison otherwise."""
    try:
        gold_ast = parse(gold)
        gold_table = execute(gold_ast, graph)
    except GqlForgeError as exc:
        raise GoldExecutionError(f"gold query does not execute: {exc}") from exc
    if pred is None:
        return False
    try:
        pred_table = execute(parse(pred), graph)
    except GqlForgeError:
        return False
    return tables_equal(pred_table, gold_table, ordered=bool(gold_ast.order_by))


# --- predictions ---------------------------------------------------------------------


@dataclass
class PredictionSet:
    by_key: dict = field(default_factory=dict)  # (id, round) -> gql

    def get(self, dialogue_id: str, round_no: int) -> str | None:
        return self.by_key.get((dialogue_id, round_no))

    def add(self, dialogue_id: str, round_no: int, gql: str) -> None:
        key = (dialogue_id, int(round_no))
        if key in self.by_key:
            raise AlignmentError(f"two predictions for {dialogue_id} round {round_no}")
        self.by_key[key] = gql

    @classmethod
    def from_dataset(cls, dialogues: Iterable[Dialogue]) -> "PredictionSet":
        out = cls()
        for d in dialogues:
            for t in d.turns:
                out.add(d.id, t.round, t.gql)
        return out


def read_predictions(path) -> PredictionSet:
    out = PredictionSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                out.add(str(doc["id"]), int(doc["round"]), doc["gql"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed prediction: {exc}", lineno) from exc
    return out


def write_predictions(preds: PredictionSet, path) -> None:
    lines = [
        json.dumps({"id": i, "round": r, "gql": g}, ensure_ascii=False) + "\n"
        for (i, r), g in sorted(preds.by_key.items())
    ]
    Path(path).write_text("".join(lines), encoding="utf-8")


# --- metrics --------------------------------------------------------------------------


@dataclass
class Tally:
    em: int = 0
    ex: int = 0
    total: int = 0

    def add(self, em: bool, ex: bool):
        self.em += em
        self.ex += ex
        self.total += 1

    def ratios(self) -> dict:
        return {
            "em": float(Fraction(self.em, self.total)) if self.total else 0.0,
            "ex": float(Fraction(self.ex, self.total)) if self.total else 0.0,
            "em_count": self.em,
            "ex_count": self.ex,
            "total": self.total,
        }


@dataclass
class MetricsReport:
    turns: Tally
    dialogues_em: int
    dialogues_ex: int
    dialogues: int
    by_round: dict
    by_pattern: dict

    @property
    def em(self) -> float:
        return self.turns.em / self.turns.total if self.turns.total else 0.0

    @property
    def ex(self) -> float:
        return self.turns.ex / self.turns.total if self.turns.total else 0.0

    @property
    def aem(self) -> float:
        return self.dialogues_em / self.dialogues if self.dialogues else 0.0

    @property
    def aex(self) -> float:
        return self.dialogues_ex / self.dialogues if self.dialogues else 0.0

    def to_dict(self, breakdown: str = "both") -> dict:
        out = {
            "em": self.em, "aem": self.aem, "ex": self.ex, "aex": self.aex,
            "counts": {
                "turns": self.turns.total, "em_turns": self.turns.em, "ex_turns": self.turns.ex,
                "dialogues": self.dialogues, "aem_dialogues": self.dialogues_em,
                "aex_dialogues": self.dialogues_ex,
            },
        }
        if breakdown in ("round", "both"):
            out["by_round"] = {k: v.ratios() for k, v in self.by_round.items()}
        if breakdown in ("pattern", "both"):
            out["by_pattern"] = {k: v.ratios() for k, v in self.by_pattern.items()}
        return out


def compute_metrics(preds: PredictionSet, gold: Sequence[Dialogue], graph) -> MetricsReport:
    known = {(d.id, t.round) for d in gold for t in d.turns}
    for key in preds.by_key:
        if key not in known:
            raise AlignmentError(f"prediction for unknown dialogue/round {key[0]}/{key[1]}")
    turns = Tally()
    by_round = {b: Tally() for b in ROUND_BUCKETS}
    by_pattern: dict[str, Tally] = {}
    d_em = d_ex = 0
    for d in gold:
        all_em = all_ex = True
        for t in d.turns:
            pred = preds.get(d.id, t.round)
            em = exact_match(pred, t.gql)
            ex = execution_match(pred, t.gql, graph)
            turns.add(em, ex)
            by_round[round_bucket(t.round)].add(em, ex)
            tag = t.pattern.value if t.pattern else INITIAL
            by_pattern.setdefault(tag, Tally()).add(em, ex)
            all_em &= em
            all_ex &= ex
        d_em += all_em
        d_ex += all_ex
    by_round = {k: v for k, v in by_round.items() if v.total}
    ordered = {k: by_pattern[k] for k in sorted(by_pattern, key=lambda k: (k == INITIAL, k))}
    return MetricsReport(turns, d_em, d_ex, len(gold), by_round, ordered)


def format_report(report: MetricsReport, breakdown: str = "both") -> str:
    """Aligned plain-text table; pattern rows omit the opening turns, shown on their own line."""
    lines = [
        f"{'metric':<8}{'value':>9}",
        f"{'EM':<8}{report.em:>9.4f}",
        f"{'AEM':<8}{report.aem:>9.4f}",
        f"{'EX':<8}{report.ex:>9.4f}",
        f"{'AEX':<8}{report.aex:>9.4f}",
    ]

    def table(title, rows):
        lines.append("")
        lines.append(f"{title:<10}{'EM':>9}{'EX':>9}{'turns':>8}")
        for key, tally in rows:
            r = tally.ratios()
            lines.append(f"{key:<10}{r['em']:>9.4f}{r['ex']:>9.4f}{tally.total:>8}")

    if breakdown in ("round", "both"):
        table("round", report.by_round.items())
    if breakdown in ("pattern", "both"):
        table("pattern", [(k, v) for k, v in report.by_pattern.items() if k != INITIAL])
        if INITIAL in report.by_pattern:
            r = report.by_pattern[INITIAL].ratios()
            lines.append(f"(opening turns: EM {r['em']:.4f}, EX {r['ex']:.4f}, {r['total']} turns)")
    return "\n".join(lines)


# --- analytics -------------------------------------------------------------------------


@dataclass
class DatasetAnalytics:
    gql_count: int
    keyword_counts: dict
    total_keywords: int
    informative_keywords: int
    query_types: dict

    @property
    def avg_informative(self) -> float:
        return self.informative_keywords / self.gql_count if self.gql_count else 0.0

    def to_dict(self) -> dict:
        return {
            "gql_count": self.gql_count,
            "keyword_counts": self.keyword_counts,
            "total_keywords": self.total_keywords,
            "informative_keywords": self.informative_keywords,
            "avg_informative_per_gql": self.avg_informative,
            "query_types": self.query_types,
        }


def analyze_dataset(dataset: Sequence[Dialogue], schema=None) -> DatasetAnalytics:
    counts: Counter = Counter()
    types: Counter = Counter()
    n = 0
    for d in dataset:
        for t in d.turns:
            n += 1
            counts.update(count_keywords(t.gql).counts)
            try:
                types[classify_query_type(parse(t.gql), schema).value] += 1
            except GqlForgeError:
                types["Unparsed"] += 1
    ordered = {k: counts[k] for k in ALL_KEYWORDS if counts[k]}
    kc = {**{q.value: 0 for q in QueryType}, **types}
    total = sum(ordered.values())
    informative = sum(v for k, v in ordered.items() if k not in ("MATCH", "RETURN"))
    return DatasetAnalytics(n, ordered, total, informative, kc)
