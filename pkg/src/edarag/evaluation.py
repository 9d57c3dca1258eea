"""Three-condition evaluation harness.

Runs a benchmark with no context, with correct retrieved context, and with
irrelevant context, judges the answers, and reports per-condition accuracy,
the retrieval gain (accuracy with correct context minus accuracy without),
and the noise impact (accuracy with irrelevant context minus accuracy
without), plus per-tool-category breakdowns.
"""
from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import ToolCategory
from .errors import (
    ConditionSetMismatch,
    DataError,
    DuplicateItemId,
    EmptyRetrieval,
    GatewayFailure,
    MalformedRecord,
    UnparseableVerdict,
    UnsupportedSchema,
)
from .records import SCHEMA_VERSION, read_records, require_fields, write_records
from .retrieval import HybridRetriever
from .scenarios import Context, derive_seed, retrieve_relevant, sample_irrelevant

logger = logging.getLogger(__name__)


class Condition(str, Enum):
    NONE = "none"
    CORRECT_CTX = "correct_ctx"
    IRRELEVANT_CTX = "irrelevant_ctx"


class Verdict(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"


class JudgeKind(str, Enum):
    ORACLE = "oracle"
    MODEL = "model"


CONDITION_ORDER = [Condition.NONE, Condition.CORRECT_CTX, Condition.IRRELEVANT_CTX]


@dataclass
class BenchmarkItem:
    item_id: str
    question: str
    gold_answer: str
    tool_category: ToolCategory = ToolCategory.UNKNOWN
    gold_chunk_ids: list[str] | None = None

    def __post_init__(self):
        self.tool_category = ToolCategory(self.tool_category)
        if not self.question or not self.gold_answer:
            raise ValueError(f"item {self.item_id!r} needs a non-empty question and gold answer")


@dataclass
class EvalRecord:
    item_id: str
    condition: Condition
    contexts: list[Context]
    predicted: str
    verdict: Verdict
    judge_kind: JudgeKind
    gateway_failed: bool = False

    def __post_init__(self):
        self.condition = Condition(self.condition)
        self.verdict = Verdict(self.verdict)
        self.judge_kind = JudgeKind(self.judge_kind)
        self.contexts = [tuple(c) for c in self.contexts]
        if self.condition is Condition.NONE and self.contexts:
            raise ValueError("condition 'none' must have empty contexts")


@dataclass
class EvalReport:
    accuracy: dict[str, float]
    delta_rag: float | None
    delta_noise: float | None
    per_category: dict[str, float]
    counts: dict[str, int]
    flagged: dict[str, int]
    config_fingerprint: str = ""
    records: list[EvalRecord] = field(default_factory=list)


# --- benchmark loading ----------------------------------------------------------

def load_benchmark(path: str | Path) -> list[BenchmarkItem]:
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    for line_no, record in read_records(path):
        require_fields(record, line_no, "item_id", "question", "gold_answer")
        item_id = record["item_id"]
        if item_id in seen:
            raise DuplicateItemId(item_id)
        seen.add(item_id)
        try:
            items.append(
                BenchmarkItem(
                    item_id=item_id,
                    question=record["question"],
                    gold_answer=record["gold_answer"],
                    tool_category=record.get("tool_category", "unknown"),
                    gold_chunk_ids=record.get("gold_chunk_ids"),
                )
            )
        except ValueError as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return items


def write_benchmark(items: Sequence[BenchmarkItem], path: str | Path) -> None:
    def rows():
        for item in items:
            row = {
                "schema_version": SCHEMA_VERSION,
                "item_id": item.item_id,
                "question": item.question,
                "gold_answer": item.gold_answer,
                "tool_category": item.tool_category.value,
            }
            if item.gold_chunk_ids is not None:
                row["gold_chunk_ids"] = item.gold_chunk_ids
            yield row

    write_records(path, rows())


# --- prompt assembly --------------------------------------------------------------

def assemble_prompt(question: str, contexts: Sequence[Context]) -> str:
    """Bit-stable prompt: optional numbered context block, then the question."""
    parts = []
    if contexts:
        block = "\n".join(f"[{i}] {text}" for i, (_, text) in enumerate(contexts, 1))
        parts.append(f"Reference documents:\n{block}\n\n")
    parts.append(f"Question: {question}\nAnswer:")
    return "".join(parts)


# --- judging -----------------------------------------------------------------------

_PUNCT_STRIP = string.punctuation + string.whitespace


def normalize_answer(answer: str) -> str:
    """Lowercase, treat ``_``/``-`` as spaces, trim punctuation, squeeze spaces."""
    lowered = answer.lower().replace("_", " ").replace("-", " ")
    stripped = lowered.strip(_PUNCT_STRIP)
    return " ".join(stripped.split())


def oracle_judge(gold: str, predicted: str) -> Verdict:
    return Verdict.CORRECT if normalize_answer(gold) == normalize_answer(predicted) else Verdict.INCORRECT


def _parse_verdict(raw: str) -> Verdict | None:
    token = raw.strip().upper()
    if token == "CORRECT":
        return Verdict.CORRECT
    if token == "INCORRECT":
        return Verdict.INCORRECT
    return None


def model_judge(question: str, gold: str, predicted: str, judge) -> Verdict:
    """Ask the judge model for a binary verdict; retry once on noise."""
    for attempt in range(2):
        raw = judge.judge(question, gold, predicted)
        verdict = _parse_verdict(raw)
        if verdict is not None:
            return verdict
        logger.warning("unparseable judge output on attempt %d: %r", attempt + 1, raw[:80])
    raise UnparseableVerdict(f"judge produced no CORRECT/INCORRECT token for {question[:40]!r}")


# --- condition runs ------------------------------------------------------------------

def _contexts_for_item(
    item: BenchmarkItem,
    condition: Condition,
    corpus,
    seed: int,
) -> list[Context]:
    if condition is Condition.NONE:
        return []
    if condition is Condition.CORRECT_CTX:
        if item.gold_chunk_ids:
            texts = corpus.chunk_texts if isinstance(corpus, HybridRetriever) else corpus
            if texts is None:
                raise DataError("correct_ctx with annotations needs a chunk text mapping")
            try:
                return [(cid, texts[cid]) for cid in item.gold_chunk_ids]
            except KeyError as exc:
                raise DataError(f"gold chunk id {exc.args[0]!r} not present in corpus") from exc
        if not isinstance(corpus, HybridRetriever):
            raise DataError("correct_ctx without annotations needs a retrieval corpus")
        try:
            return retrieve_relevant(corpus, item.question, 3)
        except EmptyRetrieval:
            logger.warning("empty retrieval for %s; evaluating without contexts", item.item_id)
            return []
    if not isinstance(corpus, HybridRetriever):
        raise DataError("irrelevant_ctx needs a retrieval corpus")
    return sample_irrelevant(corpus, item.question, n=3, seed=derive_seed(seed, item.item_id))


def run_condition(
    items: Sequence[BenchmarkItem],
    condition: Condition | str,
    model,
    corpus: HybridRetriever | Mapping[str, str] | None = None,
    seed: int = 0,
    judge: JudgeKind | str = JudgeKind.ORACLE,
    judge_gateway=None,
) -> list[EvalRecord]:
    """Evaluate every item under one retrieval condition.

    Gateway failures mark the item incorrect with a failure flag instead of
    aborting the batch.
    """
    condition = Condition(condition)
    judge = JudgeKind(judge)
    if judge is JudgeKind.MODEL and judge_gateway is None:
        raise DataError("model judging requires a judge gateway")
    records: list[EvalRecord] = []
    for item in items:
        contexts = _contexts_for_item(item, condition, corpus, seed)
        prompt = assemble_prompt(item.question, contexts)
        failed = False
        try:
            predicted = model.generate(prompt)
        except GatewayFailure as exc:
            logger.warning("gateway failure on %s: %s", item.item_id, exc)
            predicted = ""
            failed = True
        if failed:
            verdict = Verdict.INCORRECT
        elif judge is JudgeKind.ORACLE:
            verdict = oracle_judge(item.gold_answer, predicted)
        else:
            verdict = model_judge(item.question, item.gold_answer, predicted, judge_gateway)
        records.append(
            EvalRecord(
                item_id=item.item_id,
                condition=condition,
                contexts=contexts,
                predicted=predicted,
                verdict=verdict,
                judge_kind=judge,
                gateway_failed=failed,
            )
        )
    return records


# --- metrics --------------------------------------------------------------------------

def _accuracy(records: Sequence[EvalRecord]) -> float:
    return sum(1 for r in records if r.verdict is Verdict.CORRECT) / len(records)


def _delta(records_by_condition: dict[Condition, list[EvalRecord]], a: Condition, b: Condition) -> float | None:
    """accuracy(a) - accuracy(b), requiring both conditions over the same items."""
    if a not in records_by_condition or b not in records_by_condition:
        return None
    ids_a = {r.item_id for r in records_by_condition[a]}
    ids_b = {r.item_id for r in records_by_condition[b]}
    if ids_a != ids_b:
        raise ConditionSetMismatch(f"{a.value} and {b.value} cover different item sets")
    return _accuracy(records_by_condition[a]) - _accuracy(records_by_condition[b])


def breakdown_by_category(records: Sequence[EvalRecord], items: Sequence[BenchmarkItem]) -> dict[str, float]:
    """Accuracy per tool category over all given records; empty categories omitted."""
    category_of = {item.item_id: item.tool_category for item in items}
    grouped: dict[str, list[EvalRecord]] = {}
    for record in records:
        if record.item_id not in category_of:
            raise DataError(f"record references unknown item {record.item_id!r}")
        grouped.setdefault(category_of[record.item_id].value, []).append(record)
    return {category: _accuracy(rs) for category, rs in sorted(grouped.items())}


def compute_metrics(
    records: Sequence[EvalRecord],
    items: Sequence[BenchmarkItem] | None = None,
    config_fingerprint: str = "",
) -> EvalReport:
    """Aggregate records into accuracies, deltas, and per-category breakdown."""
    by_condition: dict[Condition, list[EvalRecord]] = {}
    for record in records:
        by_condition.setdefault(record.condition, []).append(record)
    accuracy = {cond.value: _accuracy(rs) for cond, rs in by_condition.items()}
    delta_rag = _delta(by_condition, Condition.CORRECT_CTX, Condition.NONE)
    delta_noise = _delta(by_condition, Condition.IRRELEVANT_CTX, Condition.NONE)
    per_category = breakdown_by_category(records, items) if items else {}
    counts = {cond.value: len(rs) for cond, rs in by_condition.items()}
    flagged = {cond.value: sum(1 for r in rs if r.gateway_failed) for cond, rs in by_condition.items()}
    return EvalReport(
        accuracy=accuracy,
        delta_rag=delta_rag,
        delta_noise=delta_noise,
        per_category=per_category,
        counts=counts,
        flagged=flagged,
        config_fingerprint=config_fingerprint,
        records=list(records),
    )


# --- rendering --------------------------------------------------------------------------

def _round1(value: float) -> Decimal:
    quantized = Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return quantized + Decimal("0.0") if quantized == 0 else quantized  # avoid -0.0


def format_percent(fraction: float) -> str:
    return f"{_round1(fraction * 100.0)}%"


def format_delta(delta: float) -> str:
    rounded = _round1(delta * 100.0)
    sign = "+" if rounded >= 0 else ""
    return f"({sign}{rounded})"


def render_text_table(report: EvalReport) -> str:
    """Human-readable table: accuracies as percentages, deltas in parentheses."""
    lines = [f"{'condition':<16}{'accuracy':<20}", "-" * 36]
    for condition in CONDITION_ORDER:
        key = condition.value
        if key not in report.accuracy:
            continue
        cell = format_percent(report.accuracy[key])
        if condition is Condition.CORRECT_CTX and report.delta_rag is not None:
            cell += f" {format_delta(report.delta_rag)}"
        elif condition is Condition.IRRELEVANT_CTX and report.delta_noise is not None:
            cell += f" {format_delta(report.delta_noise)}"
        lines.append(f"{key:<16}{cell:<20}")
    if report.per_category:
        lines.append("")
        lines.append(f"{'category':<16}{'accuracy':<20}")
        lines.append("-" * 36)
        for category, acc in report.per_category.items():
            lines.append(f"{category:<16}{format_percent(acc):<20}")
    if report.counts:
        lines.append("")
        lines.append("items: " + " ".join(f"{c}={n}" for c, n in sorted(report.counts.items())))
        total_flagged = sum(report.flagged.values())
        lines.append(f"gateway failures: {total_flagged}")
    if report.config_fingerprint:
        lines.append(f"config: {report.config_fingerprint}")
    return "\n".join(lines) + "\n"


def _record_to_dict(record: EvalRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "item_id": record.item_id,
        "condition": record.condition.value,
        "contexts": [{"chunk_id": cid, "text": text} for cid, text in record.contexts],
        "predicted": record.predicted,
        "verdict": record.verdict.value,
        "judge_kind": record.judge_kind.value,
        "gateway_failed": record.gateway_failed,
    }


def _record_from_dict(data: dict, line_no: int = 0) -> EvalRecord:
    try:
        return EvalRecord(
            item_id=data["item_id"],
            condition=data["condition"],
            contexts=[(c["chunk_id"], c["text"]) for c in data["contexts"]],
            predicted=data["predicted"],
            verdict=data["verdict"],
            judge_kind=data["judge_kind"],
            gateway_failed=data.get("gateway_failed", False),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedRecord(line_no, str(exc)) from exc


def write_eval_records(records: Sequence[EvalRecord], path: str | Path) -> None:
    write_records(path, (_record_to_dict(r) for r in records))


def read_eval_records(path: str | Path) -> list[EvalRecord]:
    return [_record_from_dict(record, line_no) for line_no, record in read_records(path)]


def render_report(report: EvalReport, path: str | Path | None, fmt: str = "machine") -> str:
    """Render to ``machine`` (round-trippable JSON) or ``text_table`` form.

    Returns the rendered text; writes it to ``path`` when given.
    """
    if fmt == "machine":
        document = {
            "schema_version": SCHEMA_VERSION,
            "accuracy": report.accuracy,
            "delta_rag": report.delta_rag,
            "delta_noise": report.delta_noise,
            "per_category": report.per_category,
            "counts": report.counts,
            "flagged": report.flagged,
            "config_fingerprint": report.config_fingerprint,
            "records": [_record_to_dict(r) for r in report.records],
        }
        rendered = json.dumps(document, ensure_ascii=False, indent=2) + "\n"
    elif fmt == "text_table":
        rendered = render_text_table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(rendered, encoding="utf-8")
    return rendered


def read_report(path: str | Path) -> EvalReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("schema_version") != SCHEMA_VERSION:
        raise UnsupportedSchema(data.get("schema_version"), SCHEMA_VERSION)
    return EvalReport(
        accuracy=data["accuracy"],
        delta_rag=data["delta_rag"],
        delta_noise=data["delta_noise"],
        per_category=data["per_category"],
        counts=data["counts"],
        flagged=data["flagged"],
        config_fingerprint=data.get("config_fingerprint", ""),
        records=[_record_from_dict(r) for r in data.get("records", [])],
    )
