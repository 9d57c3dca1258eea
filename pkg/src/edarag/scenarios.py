"""Retrieval-scenario training data construction and dataset surfaces.

For every QA pair the builder emits three training examples: one with the
retrieved relevant contexts, one with deliberately irrelevant contexts, and
one with a partial subsample of the relevant contexts. The same module emits
the supervised fine-tuning and pretraining record surfaces consumed by
downstream training stages.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Chunk, ToolCategory
from .errors import (
    EmptyRelevantSet,
    EmptyRetrieval,
    InsufficientIrrelevantPool,
    MalformedRecord,
    NoSourcesSelected,
)
from .records import SCHEMA_VERSION, read_records, require_fields, write_records
from .retrieval import HybridRetriever
from .text import stable_u64

logger = logging.getLogger(__name__)

Context = tuple[str, str]  # (chunk_id, text)


class Provenance(str, Enum):
    ENGINEER_RECORD = "engineer_record"
    DISTILLED = "distilled"
    SYNTHETIC = "synthetic"


class Scenario(str, Enum):
    CORRECT = "correct"
    IRRELEVANT = "irrelevant"
    PARTIAL = "partial"


class PretrainOrigin(str, Enum):
    RAW_CHUNK = "raw_chunk"
    QA_FORMAT = "qa_format"
    REWRITE = "rewrite"
    CLOZE = "cloze"
    MCQ = "mcq"


@dataclass
class QAPair:
    qa_id: str
    question: str
    answer: str
    tool_category: ToolCategory = ToolCategory.UNKNOWN
    reasoning: str | None = None
    gold_chunk_ids: list[str] | None = None
    provenance: Provenance = Provenance.ENGINEER_RECORD

    def __post_init__(self):
        self.tool_category = ToolCategory(self.tool_category)
        self.provenance = Provenance(self.provenance)
        if not self.question or not self.answer:
            raise ValueError(f"QA pair {self.qa_id!r} needs a non-empty question and answer")


@dataclass
class ScenarioExample:
    qa_id: str
    question: str
    contexts: list[Context]
    answer: str
    scenario: Scenario
    seed: int

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        self.contexts = [tuple(c) for c in self.contexts]


@dataclass
class SftRecord:
    qa_id: str
    input: str
    target: str
    annotation_r: str | None = None


@dataclass
class PretrainRecord:
    text: str
    origin: PretrainOrigin
    source_chunk_id: str | None = None

    def __post_init__(self):
        self.origin = PretrainOrigin(self.origin)
        if not self.text:
            raise ValueError("pretraining record text must be non-empty")


def derive_seed(base_seed: int, *parts) -> int:
    """Per-item 64-bit seed, stable across runs and platforms."""
    return stable_u64(base_seed, *parts)


def retrieve_relevant(retriever: HybridRetriever, question: str, k: int = 3) -> list[Context]:
    """Top-k hybrid retrieval contexts for a question, in rank order."""
    hits = retriever.retrieve(question, k)
    if not hits:
        raise EmptyRetrieval(f"no chunk scored positively for {question!r}")
    return [(h.chunk_id, retriever.chunk_texts[h.chunk_id]) for h in hits]


def sample_irrelevant(
    retriever: HybridRetriever,
    question: str,
    n: int,
    seed: int,
    k: int = 3,
) -> list[Context]:
    """Seeded uniform sample of chunks unrelated to the question.

    Eligible chunks sit outside the fused candidate pool for the question and
    belong to documents disjoint from the documents of its top-k relevant
    contexts.
    """
    fused_ids = {h.chunk_id for h in retriever.fused(question)[: retriever.pool_size]}
    try:
        relevant = retrieve_relevant(retriever, question, k)
        relevant_docs = {retriever.chunk_docs[cid] for cid, _ in relevant}
    except EmptyRetrieval:
        relevant_docs = set()
    pool = [
        c for c in retriever.chunks
        if c.chunk_id not in fused_ids and c.doc_id not in relevant_docs
    ]
    if len(pool) < n:
        raise InsufficientIrrelevantPool(len(pool), n)
    pool.sort(key=lambda c: c.chunk_id)
    rng = random.Random(seed)
    picked = rng.sample(pool, n)
    return [(c.chunk_id, c.text) for c in picked]


def subsample_partial(contexts: Sequence[Context], ratio: float = 0.5, seed: int = 0) -> list[Context]:
    """Seeded uniform subset of ceil(ratio * len(contexts)), keeping relative order."""
    if not contexts:
        raise EmptyRelevantSet("cannot subsample an empty context set")
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    size = math.ceil(ratio * len(contexts))
    rng = random.Random(seed)
    keep = sorted(rng.sample(range(len(contexts)), size))
    return [contexts[i] for i in keep]


def build_rag_dataset(
    d_qa: Sequence[QAPair],
    retriever: HybridRetriever,
    k: int = 3,
    ratio: float = 0.5,
    seed: int = 0,
) -> list[ScenarioExample]:
    """Emit (correct, irrelevant, partial) examples for each retrievable pair.

    Pairs whose retrieval comes back empty, or whose irrelevant pool is too
    small, are skipped with a warning; the batch never aborts.
    """
    examples: list[ScenarioExample] = []
    for pair in d_qa:
        try:
            relevant = retrieve_relevant(retriever, pair.question, k)
        except EmptyRetrieval:
            logger.warning("skipping %s: empty retrieval", pair.qa_id)
            continue
        irr_seed = derive_seed(seed, pair.qa_id, "irrelevant")
        partial_seed = derive_seed(seed, pair.qa_id, "partial")
        try:
            irrelevant = sample_irrelevant(retriever, pair.question, n=k, seed=irr_seed, k=k)
        except InsufficientIrrelevantPool as exc:
            logger.warning("skipping %s: %s", pair.qa_id, exc)
            continue
        partial = subsample_partial(relevant, ratio, partial_seed)
        examples.append(
            ScenarioExample(pair.qa_id, pair.question, relevant, pair.answer, Scenario.CORRECT, derive_seed(seed, pair.qa_id, "correct"))
        )
        examples.append(ScenarioExample(pair.qa_id, pair.question, irrelevant, pair.answer, Scenario.IRRELEVANT, irr_seed))
        examples.append(ScenarioExample(pair.qa_id, pair.question, partial, pair.answer, Scenario.PARTIAL, partial_seed))
    return examples


def emit_sft_dataset(d_qa: Sequence[QAPair]) -> list[SftRecord]:
    """One supervised record per pair; reasoning stays out of the target."""
    return [
        SftRecord(qa_id=p.qa_id, input=p.question, target=p.answer, annotation_r=p.reasoning)
        for p in d_qa
    ]


def emit_pretraining_mix(
    chunks: Sequence[Chunk],
    augmented: Sequence[PretrainRecord],
    mix: dict[PretrainOrigin | str, float],
    seed: int = 0,
) -> list[PretrainRecord]:
    """Seeded interleaving whose per-origin counts follow the mix weights.

    The largest total is taken such that counts stay proportional to the
    weights (within one record per origin) without exceeding what is
    available; selection within an origin is a seeded uniform subsample.
    """
    weights = {PretrainOrigin(o): w for o, w in mix.items()}
    if any(w < 0 for w in weights.values()):
        raise ValueError("mix weights must be non-negative")
    if not any(w > 0 for w in weights.values()):
        raise NoSourcesSelected("at least one origin weight must be positive")

    pools: dict[PretrainOrigin, list[PretrainRecord]] = {}
    for chunk in chunks:
        pools.setdefault(PretrainOrigin.RAW_CHUNK, []).append(
            PretrainRecord(text=chunk.text, origin=PretrainOrigin.RAW_CHUNK, source_chunk_id=chunk.chunk_id)
        )
    for record in augmented:
        pools.setdefault(record.origin, []).append(record)

    active = {o: w for o, w in weights.items() if w > 0}
    scale = min(len(pools.get(o, ())) / w for o, w in active.items())
    rng = random.Random(seed)
    selected: list[PretrainRecord] = []
    for origin in sorted(active, key=lambda o: o.value):
        pool = pools.get(origin, [])
        take = min(len(pool), round(active[origin] * scale))
        if take == 0:
            continue
        keep = sorted(rng.sample(range(len(pool)), take))
        selected.extend(pool[i] for i in keep)
    rng.shuffle(selected)
    return selected


# --- invariant checking (shared by tests and callers) ---------------------------

def check_scenario_invariants(
    examples: Sequence[ScenarioExample],
    chunk_docs: dict[str, str],
    k: int = 3,
    ratio: float = 0.5,
) -> list[str]:
    """Return human-readable violations; empty list means all invariants hold."""
    violations: list[str] = []
    by_pair: dict[str, dict[Scenario, ScenarioExample]] = {}
    for ex in examples:
        by_pair.setdefault(ex.qa_id, {})[ex.scenario] = ex
    for qa_id, group in by_pair.items():
        if set(group) != {Scenario.CORRECT, Scenario.IRRELEVANT, Scenario.PARTIAL}:
            violations.append(f"{qa_id}: missing scenarios {sorted(s.value for s in group)}")
            continue
        correct = group[Scenario.CORRECT]
        if not 1 <= len(correct.contexts) <= k:
            violations.append(f"{qa_id}: correct scenario has {len(correct.contexts)} contexts")
        rel_docs = {chunk_docs[cid] for cid, _ in correct.contexts}
        irrelevant = group[Scenario.IRRELEVANT]
        irr_docs = {chunk_docs[cid] for cid, _ in irrelevant.contexts}
        if rel_docs & irr_docs:
            violations.append(f"{qa_id}: irrelevant contexts share documents {sorted(rel_docs & irr_docs)}")
        partial = group[Scenario.PARTIAL]
        correct_ids = [cid for cid, _ in correct.contexts]
        partial_ids = [cid for cid, _ in partial.contexts]
        if not set(partial_ids) <= set(correct_ids):
            violations.append(f"{qa_id}: partial contexts are not a subset of the correct contexts")
        expected = math.ceil(ratio * len(correct.contexts))
        if len(partial_ids) != expected:
            violations.append(f"{qa_id}: partial has {len(partial_ids)} contexts, expected {expected}")
        order = [correct_ids.index(cid) for cid in partial_ids if cid in correct_ids]
        if order != sorted(order):
            violations.append(f"{qa_id}: partial contexts do not preserve relative order")
    return violations


# --- persistence ------------------------------------------------------------------

def write_scenario_dataset(examples: Iterable[ScenarioExample], path: str | Path) -> None:
    write_records(
        path,
        (
            {
                "schema_version": SCHEMA_VERSION,
                "qa_id": ex.qa_id,
                "question": ex.question,
                "contexts": [{"chunk_id": cid, "text": text} for cid, text in ex.contexts],
                "answer": ex.answer,
                "scenario": ex.scenario.value,
                "seed": ex.seed,
            }
            for ex in examples
        ),
    )


def read_scenario_dataset(path: str | Path) -> list[ScenarioExample]:
    examples = []
    for line_no, record in read_records(path):
        require_fields(record, line_no, "qa_id", "question", "contexts", "answer", "scenario", "seed")
        try:
            examples.append(
                ScenarioExample(
                    qa_id=record["qa_id"],
                    question=record["question"],
                    contexts=[(c["chunk_id"], c["text"]) for c in record["contexts"]],
                    answer=record["answer"],
                    scenario=record["scenario"],
                    seed=record["seed"],
                )
            )
        except (ValueError, KeyError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return examples


def write_sft_dataset(records: Iterable[SftRecord], path: str | Path) -> None:
    def rows():
        for r in records:
            row = {"schema_version": SCHEMA_VERSION, "qa_id": r.qa_id, "input": r.input, "target": r.target}
            if r.annotation_r is not None:
                row["annotation_r"] = r.annotation_r
            yield row

    write_records(path, rows())


def read_sft_dataset(path: str | Path) -> list[SftRecord]:
    records = []
    for line_no, record in read_records(path):
        require_fields(record, line_no, "qa_id", "input", "target")
        records.append(
            SftRecord(
                qa_id=record["qa_id"],
                input=record["input"],
                target=record["target"],
                annotation_r=record.get("annotation_r"),
            )
        )
    return records


def write_pretrain_dataset(records: Iterable[PretrainRecord], path: str | Path) -> None:
    def rows():
        for r in records:
            row = {"schema_version": SCHEMA_VERSION, "text": r.text, "origin": r.origin.value}
            if r.source_chunk_id is not None:
                row["source_chunk_id"] = r.source_chunk_id
            yield row

    write_records(path, rows())


def read_pretrain_dataset(path: str | Path) -> list[PretrainRecord]:
    records = []
    for line_no, record in read_records(path):
        require_fields(record, line_no, "text", "origin")
        try:
            records.append(
                PretrainRecord(
                    text=record["text"],
                    origin=record["origin"],
                    source_chunk_id=record.get("source_chunk_id"),
                )
            )
        except ValueError as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return records


def write_qa_dataset(pairs: Iterable[QAPair], path: str | Path) -> None:
    def rows():
        for p in pairs:
            row = {
                "schema_version": SCHEMA_VERSION,
                "qa_id": p.qa_id,
                "question": p.question,
                "answer": p.answer,
                "tool_category": p.tool_category.value,
                "provenance": p.provenance.value,
            }
            if p.reasoning is not None:
                row["reasoning"] = p.reasoning
            if p.gold_chunk_ids is not None:
                row["gold_chunk_ids"] = p.gold_chunk_ids
            yield row

    write_records(path, rows())


def read_qa_dataset(path: str | Path) -> list[QAPair]:
    pairs = []
    for line_no, record in read_records(path):
        require_fields(record, line_no, "qa_id", "question", "answer")
        try:
            pairs.append(
                QAPair(
                    qa_id=record["qa_id"],
                    question=record["question"],
                    answer=record["answer"],
                    tool_category=record.get("tool_category", "unknown"),
                    reasoning=record.get("reasoning"),
                    gold_chunk_ids=record.get("gold_chunk_ids"),
                    provenance=record.get("provenance", "engineer_record"),
                )
            )
        except ValueError as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return pairs
