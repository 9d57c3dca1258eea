"""Corpus augmentation: QA generation, rewriting, cloze, and multiple choice.

QA generation and rewriting go through the model gateway; cloze and multiple
choice are fully deterministic so the whole pipeline can run offline. Each
strategy yields pretraining records tagged with an origin.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Chunk
from .errors import EmptyRewrite, GatewayError, InsufficientDistractors, NoEligibleTerm
from .scenarios import PretrainOrigin, PretrainRecord, Provenance, QAPair
from .text import STOPWORDS, index_terms, split_sentences, stable_u64, term_spans

logger = logging.getLogger(__name__)

MASK_MARKER = "____"
OPTION_LABELS = "ABCD"

QA_PROMPT_V1 = (
    "Write one question and its short answer about the tool documentation below.\n"
    "Use exactly this format:\n"
    "Q: <question>\n"
    "A: <answer>\n"
    "This is request {index} of {total}; cover a different detail for each request.\n\n"
    "Documentation:\n{chunk}"
)

REWRITE_PROMPT_V1 = (
    "Rewrite the documentation below in different words without changing its\n"
    "technical meaning. Reply with the rewritten text only.\n\n"
    "Documentation:\n{chunk}"
)


@dataclass
class ClozeItem:
    masked_text: str
    answer_term: str
    source_chunk_id: str

    def __post_init__(self):
        if self.masked_text.count(MASK_MARKER) != 1:
            raise ValueError("masked_text must contain exactly one mask marker")
        if len(index_terms(self.answer_term)) != 1:
            raise ValueError("answer_term must be a single index term")

    def unmask(self) -> str:
        return self.masked_text.replace(MASK_MARKER, self.answer_term, 1)


@dataclass
class McqItem:
    stem: str
    options: list[str]
    correct_index: int
    source_chunk_id: str

    def __post_init__(self):
        if len(self.options) != 4:
            raise ValueError("exactly 4 options required")
        if len({o.casefold() for o in self.options}) != 4:
            raise ValueError("options must be pairwise distinct")
        if not 0 <= self.correct_index <= 3:
            raise ValueError("correct_index out of range")


@dataclass
class AugmentConfig:
    strategies: list[str] = field(default_factory=lambda: ["cloze", "mcq"])
    qa_per_chunk: int = 1
    seed: int = 0
    backend: str | None = None  # gateway mode override (stub:... | replay:path | live)

    def __post_init__(self):
        known = {"qa", "rewrite", "cloze", "mcq"}
        unknown = set(self.strategies) - known
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")
        if not self.strategies:
            raise ValueError("at least one strategy must be selected")


class CorpusTermStats:
    """Document frequencies and term-to-document mapping over a chunk corpus."""

    def __init__(self, chunks: Sequence[Chunk]):
        self.term_docs: dict[str, set[str]] = {}
        for chunk in chunks:
            for term in set(index_terms(chunk.text)):
                self.term_docs.setdefault(term, set()).add(chunk.doc_id)
        self.doc_freq = {term: len(docs) for term, docs in self.term_docs.items()}


def _eligible(term: str) -> bool:
    lowered = term.lower()
    return lowered not in STOPWORDS and MASK_MARKER not in term


def _parse_qa_response(raw: str) -> tuple[str, str] | None:
    question = answer = None
    for line in raw.splitlines():
        stripped = line.strip()
        if question is None and stripped.startswith("Q:"):
            question = stripped[2:].strip()
        elif question is not None and stripped.startswith("A:"):
            answer = stripped[2:].strip()
            break
    if question and answer:
        return question, answer
    return None


def generate_qa(chunk: Chunk, backend, n: int) -> list[QAPair]:
    """Ask the backend for up to ``n`` QA pairs; drop malformed generations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pairs: list[QAPair] = []
    for i in range(n):
        prompt = QA_PROMPT_V1.format(index=i + 1, total=n, chunk=chunk.text)
        raw = backend.generate(prompt)
        parsed = _parse_qa_response(raw)
        if parsed is None:
            logger.warning("dropping malformed QA generation %d for %s", i + 1, chunk.chunk_id)
            continue
        question, answer = parsed
        pairs.append(
            QAPair(
                qa_id=f"{chunk.chunk_id}:qa{i}",
                question=question,
                answer=answer,
                tool_category=chunk.tool_category,
                gold_chunk_ids=[chunk.chunk_id],
                provenance=Provenance.SYNTHETIC,
            )
        )
    return pairs


def rewrite_chunk(chunk: Chunk, backend) -> PretrainRecord:
    raw = backend.generate(REWRITE_PROMPT_V1.format(chunk=chunk.text))
    text = raw.strip()
    if not text:
        raise EmptyRewrite(f"backend produced an empty rewrite for {chunk.chunk_id}")
    return PretrainRecord(text=text, origin=PretrainOrigin.REWRITE, source_chunk_id=chunk.chunk_id)


def generate_cloze(chunk: Chunk, doc_freq: Mapping[str, int], seed: int = 0) -> ClozeItem:
    """Mask the rarest eligible term of a seed-picked sentence.

    Rarity is corpus document frequency; ties go to the earliest occurrence
    in the sentence. The mask replaces exactly one occurrence, so restoring
    the answer term reproduces the sentence.
    """
    sentences = [s for s in split_sentences(chunk.text) if MASK_MARKER not in s]
    candidates = [s for s in sentences if any(_eligible(t) for t, _, _ in term_spans(s))]
    if not candidates:
        raise NoEligibleTerm(f"no maskable sentence in {chunk.chunk_id}")
    rng = random.Random(seed)
    sentence = candidates[rng.randrange(len(candidates))]
    best: tuple[int, int, str, int, int] | None = None  # (df, position, surface, start, end)
    for position, (surface, start, end) in enumerate(term_spans(sentence)):
        if not _eligible(surface):
            continue
        df = doc_freq.get(surface.lower(), 0)
        if best is None or (df, position) < (best[0], best[1]):
            best = (df, position, surface, start, end)
    assert best is not None
    _, _, surface, start, end = best
    masked = sentence[:start] + MASK_MARKER + sentence[end:]
    return ClozeItem(masked_text=masked, answer_term=surface, source_chunk_id=chunk.chunk_id)


def _term_shape(term: str) -> str:
    return "command" if ("_" in term or "-" in term) else "word"


def generate_mcq(chunk: Chunk, stats: CorpusTermStats, seed: int = 0) -> McqItem:
    """Build a 4-option item from the cloze sentence of the chunk.

    Distractors share the answer's coarse shape (command-like vs plain word),
    come from other documents, and never occur in the source chunk, so exactly
    one option is supported by the chunk text.
    """
    cloze = generate_cloze(chunk, stats.doc_freq, seed)
    answer_key = cloze.answer_term.lower()
    chunk_terms = set(index_terms(chunk.text))
    shape = _term_shape(answer_key)
    pool = sorted(
        term
        for term, docs in stats.term_docs.items()
        if term != answer_key
        and term not in chunk_terms
        and _eligible(term)
        and _term_shape(term) == shape
        and (docs - {chunk.doc_id})
    )
    if len(pool) < 3:
        raise InsufficientDistractors(len(pool))
    rng = random.Random(stable_u64(seed, "mcq-options", chunk.chunk_id))
    options = [cloze.answer_term] + rng.sample(pool, 3)
    rng.shuffle(options)
    return McqItem(
        stem=cloze.masked_text,
        options=options,
        correct_index=options.index(cloze.answer_term),
        source_chunk_id=chunk.chunk_id,
    )


def render_cloze(item: ClozeItem) -> str:
    return f"Fill in the blank: {item.masked_text}\nAnswer: {item.answer_term}"


def render_mcq(item: McqItem) -> str:
    lines = [f"Question: {item.stem}"]
    lines += [f"{OPTION_LABELS[i]}) {opt}" for i, opt in enumerate(item.options)]
    lines.append(f"Answer: {OPTION_LABELS[item.correct_index]}")
    return "\n".join(lines)


def render_qa(pair: QAPair) -> str:
    return f"Question: {pair.question}\nAnswer: {pair.answer}"


def assemble_augmented_corpus(
    chunks: Sequence[Chunk],
    backend,
    config: AugmentConfig,
    stats: CorpusTermStats | None = None,
) -> list[PretrainRecord]:
    """Run the configured strategies over the corpus, strategy-major order.

    Per-chunk failures (no eligible term, too few distractors, empty or
    malformed backend output) are logged and skipped.
    """
    if stats is None and ({"cloze", "mcq"} & set(config.strategies)):
        stats = CorpusTermStats(chunks)
    records: list[PretrainRecord] = []
    for strategy in config.strategies:
        for chunk in chunks:
            chunk_seed = stable_u64(config.seed, strategy, chunk.chunk_id)
            try:
                if strategy == "qa":
                    for pair in generate_qa(chunk, backend, config.qa_per_chunk):
                        records.append(
                            PretrainRecord(
                                text=render_qa(pair),
                                origin=PretrainOrigin.QA_FORMAT,
                                source_chunk_id=chunk.chunk_id,
                            )
                        )
                elif strategy == "rewrite":
                    records.append(rewrite_chunk(chunk, backend))
                elif strategy == "cloze":
                    item = generate_cloze(chunk, stats.doc_freq, chunk_seed)
                    records.append(
                        PretrainRecord(text=render_cloze(item), origin=PretrainOrigin.CLOZE, source_chunk_id=chunk.chunk_id)
                    )
                elif strategy == "mcq":
                    mcq = generate_mcq(chunk, stats, chunk_seed)
                    records.append(
                        PretrainRecord(text=render_mcq(mcq), origin=PretrainOrigin.MCQ, source_chunk_id=chunk.chunk_id)
                    )
            except (NoEligibleTerm, InsufficientDistractors, EmptyRewrite, GatewayError) as exc:
                logger.warning("%s skipped for %s: %s", strategy, chunk.chunk_id, exc)
    return records
