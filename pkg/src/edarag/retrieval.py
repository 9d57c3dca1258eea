"""Hybrid retrieval over the chunk corpus.

Two channels — a BM25 inverted index and an exact-scan cosine vector index —
are fused with reciprocal rank fusion and then reranked. Every ranked list in
this module obeys the same contract: ranks contiguous from 1, scores
non-increasing, ties broken by ascending chunk_id, and only positive-score
hits are kept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Chunk
from .errors import DimensionMismatch, DuplicateChunkId, EmptyCorpus, MalformedRecord, RerankerFailure
from .gateway import EmbeddingVector
from .records import SCHEMA_VERSION, read_records, require_fields, write_records
from .text import index_terms

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_RRF_K = 60
DEFAULT_POOL_SIZE = 100


class Channel(str, Enum):
    LEXICAL = "lexical"
    VECTOR = "vector"
    FUSED = "fused"
    RERANKED = "reranked"


@dataclass(frozen=True)
class RankedHit:
    chunk_id: str
    score: float
    rank: int
    channel: Channel


def _to_hits(scored: dict[str, float], channel: Channel, k: int | None = None) -> list[RankedHit]:
    """Sort positive scores descending, ties by ascending chunk_id, rank 1..n."""
    ordered = sorted(
        ((cid, s) for cid, s in scored.items() if s > 0.0),
        key=lambda pair: (-pair[1], pair[0]),
    )
    if k is not None:
        ordered = ordered[:k]
    return [RankedHit(cid, s, rank, channel) for rank, (cid, s) in enumerate(ordered, 1)]


# --- lexical channel -----------------------------------------------------------

@dataclass
class LexicalIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_length: float
    chunk_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def doc_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.doc_frequency(term)
        return math.log(1.0 + (self.chunk_count - df + 0.5) / (df + 0.5))


def build_lexical_index(chunks: Sequence[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> LexicalIndex:
    if not chunks:
        raise EmptyCorpus("cannot index an empty chunk list")
    if k1 <= 0 or not 0.0 <= b <= 1.0:
        raise ValueError("require k1 > 0 and 0 <= b <= 1")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for chunk in chunks:
        if chunk.chunk_id in doc_lengths:
            raise DuplicateChunkId(chunk.chunk_id)
        doc_lengths[chunk.chunk_id] = chunk.length_units
        counts: dict[str, int] = {}
        for term in index_terms(chunk.text):
            counts[term] = counts.get(term, 0) + 1
        for term, count in counts.items():
            postings.setdefault(term, []).append((chunk.chunk_id, count))
    avg_length = sum(doc_lengths.values()) / len(doc_lengths)
    return LexicalIndex(postings, doc_lengths, avg_length, len(doc_lengths), k1, b)


def bm25_score(
    term_frequencies: Mapping[str, int],
    chunk_length: int,
    query_terms: Sequence[str],
    index_stats: LexicalIndex,
) -> float:
    """BM25 with the +1-inside-log idf, so contributions are never negative.

    Query terms absent from the chunk contribute 0; duplicated query terms
    contribute once per occurrence in the query list.
    """
    k1, b = index_stats.k1, index_stats.b
    norm = k1 * (1.0 - b + b * chunk_length / index_stats.avg_length)
    score = 0.0
    for term in query_terms:
        tf = term_frequencies.get(term, 0)
        if tf == 0:
            continue
        score += index_stats.idf(term) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


def lexical_search(index: LexicalIndex, query: str, k: int) -> list[RankedHit]:
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = index_terms(query)
    scores: dict[str, float] = {}
    k1, b = index.k1, index.b
    for term in terms:
        entries = index.postings.get(term)
        if not entries:
            continue
        idf = index.idf(term)
        for chunk_id, tf in entries:
            norm = k1 * (1.0 - b + b * index.doc_lengths[chunk_id] / index.avg_length)
            scores[chunk_id] = scores.get(chunk_id, 0.0) + idf * (tf * (k1 + 1.0)) / (tf + norm)
    return _to_hits(scores, Channel.LEXICAL, k)


# --- vector channel -------------------------------------------------------------

@dataclass
class VectorIndex:
    chunk_ids: list[str]
    matrix: np.ndarray  # shape (n_chunks, dimension)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])


def build_vector_index(chunks: Sequence[Chunk], embedder) -> VectorIndex:
    """Embed every chunk through the gateway handle's ``embed``."""
    if not chunks:
        raise EmptyCorpus("cannot index an empty chunk list")
    seen: set[str] = set()
    vectors = []
    chunk_ids = []
    dimension: int | None = None
    for chunk in chunks:
        if chunk.chunk_id in seen:
            raise DuplicateChunkId(chunk.chunk_id)
        seen.add(chunk.chunk_id)
        vec = embedder.embed(chunk.text)
        if dimension is None:
            dimension = vec.dimension
        elif vec.dimension != dimension:
            raise DimensionMismatch(f"chunk {chunk.chunk_id} embedded to dimension {vec.dimension}, expected {dimension}")
        chunk_ids.append(chunk.chunk_id)
        vectors.append(vec.values)
    return VectorIndex(chunk_ids, np.vstack(vectors))


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def vector_search(index: VectorIndex, query_vector: EmbeddingVector | np.ndarray, k: int) -> list[RankedHit]:
    """Exhaustive exact scan by cosine similarity; keeps positive scores only."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = query_vector.values if isinstance(query_vector, EmbeddingVector) else np.asarray(query_vector, dtype=np.float64)
    if query.shape[0] != index.dimension:
        raise DimensionMismatch(f"query dimension {query.shape[0]}, index dimension {index.dimension}")
    qnorm = np.linalg.norm(query)
    row_norms = np.linalg.norm(index.matrix, axis=1)
    denom = row_norms * qnorm
    dots = index.matrix @ query
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(denom > 0.0, dots / np.where(denom > 0.0, denom, 1.0), 0.0)
    scores = {cid: float(s) for cid, s in zip(index.chunk_ids, sims)}
    return _to_hits(scores, Channel.VECTOR, k)


# --- fusion and reranking ---------------------------------------------------------

def fuse_rrf(lexical: Sequence[RankedHit], vector: Sequence[RankedHit], k_f: int = DEFAULT_RRF_K) -> list[RankedHit]:
    """Reciprocal rank fusion: score(c) = sum over channels of 1/(k_f + rank)."""
    if k_f < 1:
        raise ValueError("k_f must be >= 1")
    scores: dict[str, float] = {}
    for hit in list(lexical) + list(vector):
        scores[hit.chunk_id] = scores.get(hit.chunk_id, 0.0) + 1.0 / (k_f + hit.rank)
    return _to_hits(scores, Channel.FUSED)


def lexical_overlap_score(query: str, chunk_text: str) -> float:
    query_terms = set(index_terms(query))
    if not query_terms:
        return 0.0
    return len(query_terms & set(index_terms(chunk_text))) / len(query_terms)


def rerank(
    query: str,
    hits: Sequence[RankedHit],
    chunk_texts: Mapping[str, str],
    mode: str = "lexical_overlap",
    scorer: Callable[[str, str], float] | None = None,
) -> list[RankedHit]:
    """Re-score hits; stable sort descending so equal scores keep input order.

    ``lexical_overlap`` scores by query-term coverage and needs no external
    service. ``external`` delegates to ``scorer(query, chunk_text)``.
    """
    if not hits:
        raise ValueError("hits must be non-empty")
    if mode == "lexical_overlap":
        score_fn = lexical_overlap_score
    elif mode == "external":
        if scorer is None:
            raise RerankerFailure("external mode requires a scorer")
        score_fn = scorer
    else:
        raise ValueError(f"unknown rerank mode {mode!r}")

    rescored = []
    for hit in hits:
        text = chunk_texts[hit.chunk_id]
        try:
            score = float(score_fn(query, text))
        except Exception as exc:
            raise RerankerFailure(str(exc)) from exc
        rescored.append((hit.chunk_id, score))
    ordered = sorted(rescored, key=lambda pair: -pair[1])  # stable: ties keep input order
    return [RankedHit(cid, score, rank, Channel.RERANKED) for rank, (cid, score) in enumerate(ordered, 1)]


# --- combined engine ----------------------------------------------------------------

class HybridRetriever:
    """Owns both indexes plus the chunk metadata needed to rerank and sample."""

    def __init__(
        self,
        chunks: Sequence[Chunk],
        embedder,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        rrf_k: int = DEFAULT_RRF_K,
        pool_size: int = DEFAULT_POOL_SIZE,
        rerank_mode: str = "lexical_overlap",
        rerank_scorer: Callable[[str, str], float] | None = None,
        lexical_index: LexicalIndex | None = None,
        vector_index: VectorIndex | None = None,
    ):
        self.chunks = list(chunks)
        self.embedder = embedder
        self.rrf_k = rrf_k
        self.pool_size = pool_size
        self.rerank_mode = rerank_mode
        self.rerank_scorer = rerank_scorer
        self.lexical_index = lexical_index or build_lexical_index(self.chunks, k1, b)
        self.vector_index = vector_index or build_vector_index(self.chunks, embedder)
        self.chunk_texts = {c.chunk_id: c.text for c in self.chunks}
        self.chunk_docs = {c.chunk_id: c.doc_id for c in self.chunks}

    def lexical(self, query: str, k: int | None = None) -> list[RankedHit]:
        return lexical_search(self.lexical_index, query, k or self.pool_size)

    def vector(self, query: str, k: int | None = None) -> list[RankedHit]:
        return vector_search(self.vector_index, self.embedder.embed(query), k or self.pool_size)

    def fused(self, query: str) -> list[RankedHit]:
        """Pool-size RRF fusion of both channels."""
        return fuse_rrf(self.lexical(query), self.vector(query), self.rrf_k)

    def retrieve(self, query: str, k: int) -> list[RankedHit]:
        """Hybrid retrieval: fuse both channels, rerank, return the top k."""
        fused = self.fused(query)
        if not fused:
            return []
        reranked = rerank(query, fused, self.chunk_texts, self.rerank_mode, self.rerank_scorer)
        return reranked[:k]  # prefix keeps ranks contiguous from 1


# --- index persistence ----------------------------------------------------------------

def save_lexical_index(index: LexicalIndex, path: str | Path) -> None:
    def rows():
        yield {
            "schema_version": SCHEMA_VERSION,
            "kind": "lexical_header",
            "chunk_count": index.chunk_count,
            "avg_length": index.avg_length,
            "k1": index.k1,
            "b": index.b,
        }
        for chunk_id in index.doc_lengths:
            yield {
                "schema_version": SCHEMA_VERSION,
                "kind": "chunk_stats",
                "chunk_id": chunk_id,
                "length": index.doc_lengths[chunk_id],
            }
        for term in index.postings:
            yield {
                "schema_version": SCHEMA_VERSION,
                "kind": "posting",
                "term": term,
                "entries": [[cid, tf] for cid, tf in index.postings[term]],
            }

    write_records(path, rows())


def load_lexical_index(path: str | Path) -> LexicalIndex:
    header = None
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for line_no, record in read_records(path):
        kind = record.get("kind")
        if kind == "lexical_header":
            require_fields(record, line_no, "chunk_count", "avg_length", "k1", "b")
            header = record
        elif kind == "chunk_stats":
            require_fields(record, line_no, "chunk_id", "length")
            doc_lengths[record["chunk_id"]] = record["length"]
        elif kind == "posting":
            require_fields(record, line_no, "term", "entries")
            postings[record["term"]] = [(cid, tf) for cid, tf in record["entries"]]
        else:
            raise MalformedRecord(line_no, f"unknown record kind {kind!r}")
    if header is None:
        raise MalformedRecord(0, "missing lexical_header record")
    return LexicalIndex(postings, doc_lengths, header["avg_length"], header["chunk_count"], header["k1"], header["b"])


def save_vector_index(index: VectorIndex, path: str | Path) -> None:
    def rows():
        yield {
            "schema_version": SCHEMA_VERSION,
            "kind": "vector_header",
            "dimension": index.dimension,
            "count": len(index.chunk_ids),
        }
        for chunk_id, row in zip(index.chunk_ids, index.matrix):
            yield {
                "schema_version": SCHEMA_VERSION,
                "kind": "vector",
                "chunk_id": chunk_id,
                "values": [float(x) for x in row],
            }

    write_records(path, rows())


def load_vector_index(path: str | Path) -> VectorIndex:
    header = None
    chunk_ids: list[str] = []
    vectors: list[list[float]] = []
    for line_no, record in read_records(path):
        kind = record.get("kind")
        if kind == "vector_header":
            require_fields(record, line_no, "dimension", "count")
            header = record
        elif kind == "vector":
            require_fields(record, line_no, "chunk_id", "values")
            chunk_ids.append(record["chunk_id"])
            vectors.append(record["values"])
        else:
            raise MalformedRecord(line_no, f"unknown record kind {kind!r}")
    if header is None:
        raise MalformedRecord(0, "missing vector_header record")
    matrix = np.asarray(vectors, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != header["dimension"]:
        raise DimensionMismatch("stored vectors do not match header dimension")
    return VectorIndex(chunk_ids, matrix)
