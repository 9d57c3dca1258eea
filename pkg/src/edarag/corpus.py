"""Document ingestion, chunking, dedup, and corpus persistence.

A corpus file is line-delimited: documents (``kind: "doc"``) and their
retrieval chunks (``kind: "chunk"``) can share a file; order is preserved.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import EmptyDocument, MalformedRecord
from .records import SCHEMA_VERSION, read_records, require_fields, write_records
from .text import count_terms, normalize_text, term_spans, text_digest

logger = logging.getLogger(__name__)


class SourceKind(str, Enum):
    TOOL_MANUAL = "tool_manual"
    QA_RECORD = "qa_record"
    PAPER = "paper"
    SCRIPT_DOC = "script_doc"


class ToolCategory(str, Enum):
    SYNTHESIS = "synthesis"
    PHYSICAL = "physical"
    SIMULATION = "simulation"
    DFT = "dft"
    UNKNOWN = "unknown"


class BoundaryPreference(str, Enum):
    PARAGRAPH = "paragraph"
    SENTENCE = "sentence"
    NONE = "none"


@dataclass
class Document:
    doc_id: str
    source_kind: SourceKind
    tool_category: ToolCategory
    title: str
    text: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.source_kind = SourceKind(self.source_kind)
        self.tool_category = ToolCategory(self.tool_category)
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.text:
            raise EmptyDocument(f"document {self.doc_id!r} has empty text")


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    length_units: int
    tool_category: ToolCategory

    def __post_init__(self):
        self.tool_category = ToolCategory(self.tool_category)
        if self.chunk_id != f"{self.doc_id}#{self.ordinal}":
            raise ValueError(f"chunk_id {self.chunk_id!r} must be doc_id#ordinal")
        if self.ordinal < 0:
            raise ValueError("ordinal must be >= 0")
        if self.length_units < 1:
            raise ValueError("length_units must be >= 1")


@dataclass(frozen=True)
class ChunkingConfig:
    target_size: int = 512
    overlap: int = 64
    boundary_preference: BoundaryPreference = BoundaryPreference.PARAGRAPH

    def __post_init__(self):
        object.__setattr__(self, "boundary_preference", BoundaryPreference(self.boundary_preference))
        if self.target_size < 1:
            raise ValueError("target_size must be positive")
        if not 0 <= self.overlap < self.target_size:
            raise ValueError("overlap must be in [0, target_size)")


def make_chunk(doc_id: str, ordinal: int, text: str, tool_category: ToolCategory | str) -> Chunk:
    """Build a chunk with length_units derived from its text."""
    return Chunk(
        chunk_id=f"{doc_id}#{ordinal}",
        doc_id=doc_id,
        ordinal=ordinal,
        text=text,
        length_units=max(1, count_terms(text)),
        tool_category=tool_category,
    )


def ingest_document(
    raw_text: str,
    source_kind: SourceKind | str,
    tool_category: ToolCategory | str,
    title: str,
    doc_id: str | None = None,
    metadata: dict[str, str] | None = None,
) -> Document:
    """Normalize raw text into a Document with a deterministic fresh id.

    The default id is a content hash, so re-ingesting identical input yields
    the same id and downstream artifacts stay byte-reproducible.
    """
    text = normalize_text(raw_text)
    if not text:
        raise EmptyDocument(f"document {title!r} is empty after normalization")
    if doc_id is None:
        digest = hashlib.sha256(
            "\x1f".join([str(source_kind), str(tool_category), title, text]).encode("utf-8")
        ).hexdigest()
        doc_id = f"doc-{digest[:12]}"
    return Document(
        doc_id=doc_id,
        source_kind=source_kind,
        tool_category=tool_category,
        title=title,
        text=text,
        metadata=dict(metadata or {}),
    )


def _paragraph_break_flags(text: str, spans: list[tuple[str, int, int]]) -> list[bool]:
    """flags[i] is True when a blank line separates term i-1 from term i."""
    flags = [False] * (len(spans) + 1)
    for i in range(1, len(spans)):
        gap = text[spans[i - 1][2]: spans[i][1]]
        if "\n\n" in gap:
            flags[i] = True
    return flags


def _sentence_break_flags(text: str, spans: list[tuple[str, int, int]]) -> list[bool]:
    """flags[i] is True when term i starts a new sentence."""
    flags = [False] * (len(spans) + 1)
    for i in range(1, len(spans)):
        gap = text[spans[i - 1][2]: spans[i][1]]
        if "\n" in gap or any(ch in gap for ch in ".!?"):
            flags[i] = True
    return flags


def chunk_document(doc: Document, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Segment a document into overlapping windows of index terms.

    Windows advance by ``target_size - overlap`` terms. With a paragraph or
    sentence boundary preference, a window end snaps back to the latest
    matching break found strictly inside the last 25% of the window. Chunk
    texts are character spans of the document, so concatenating them (minus
    overlaps) reproduces the document and no character is lost.
    """
    cfg = cfg or ChunkingConfig()
    text = doc.text
    spans = term_spans(text)
    n = len(spans)
    if n == 0:
        # degenerate: text with no index terms becomes a single opaque chunk
        return [Chunk(f"{doc.doc_id}#0", doc.doc_id, 0, text, 1, doc.tool_category)]

    if cfg.boundary_preference is BoundaryPreference.PARAGRAPH:
        break_flags = _paragraph_break_flags(text, spans)
    elif cfg.boundary_preference is BoundaryPreference.SENTENCE:
        break_flags = _sentence_break_flags(text, spans)
    else:
        break_flags = None

    windows: list[tuple[int, int]] = []  # [start_term, end_term)
    start = 0
    while start < n:
        end = min(start + cfg.target_size, n)
        if break_flags is not None and start + cfg.target_size < n:
            lo = start + (3 * cfg.target_size) // 4 + 1
            for b in range(end, lo - 1, -1):
                if break_flags[b]:
                    end = b
                    break
        windows.append((start, end))
        if end >= n:
            break
        start = max(end - cfg.overlap, start + 1)

    chunks: list[Chunk] = []
    for ordinal, (ts, te) in enumerate(windows):
        char_start = 0 if ordinal == 0 else spans[ts][1]
        if ordinal == len(windows) - 1:
            char_end = len(text)
        else:
            # extend to the next window's first char so separators are covered
            next_start_char = spans[windows[ordinal + 1][0]][1]
            char_end = max(spans[te - 1][2], next_start_char)
        piece = text[char_start:char_end]
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{ordinal}",
                doc_id=doc.doc_id,
                ordinal=ordinal,
                text=piece,
                length_units=max(1, count_terms(piece)),
                tool_category=doc.tool_category,
            )
        )
    return chunks


def dedupe_corpus(chunks: list[Chunk]) -> list[Chunk]:
    """Drop chunks whose normalized text was already seen, keeping input order."""
    seen: set[str] = set()
    kept: list[Chunk] = []
    for chunk in chunks:
        digest = text_digest(chunk.text)
        if digest in seen:
            continue
        seen.add(digest)
        kept.append(chunk)
    return kept


# --- persistence -------------------------------------------------------------

def _doc_record(doc: Document) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "doc",
        "doc_id": doc.doc_id,
        "source_kind": doc.source_kind.value,
        "tool_category": doc.tool_category.value,
        "title": doc.title,
        "text": doc.text,
        "metadata": doc.metadata,
    }


def _chunk_record(chunk: Chunk) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "chunk",
        "chunk_id": chunk.chunk_id,
        "doc_id": chunk.doc_id,
        "ordinal": chunk.ordinal,
        "text": chunk.text,
        "length_units": chunk.length_units,
        "tool_category": chunk.tool_category.value,
    }


def write_corpus(corpus: list[Document | Chunk], path: str | Path) -> None:
    write_records(path, (_doc_record(e) if isinstance(e, Document) else _chunk_record(e) for e in corpus))


def read_corpus(path: str | Path) -> list[Document | Chunk]:
    entries: list[Document | Chunk] = []
    for line_no, record in read_records(path):
        kind = record.get("kind")
        try:
            if kind == "doc":
                require_fields(record, line_no, "doc_id", "source_kind", "tool_category", "title", "text")
                entries.append(
                    Document(
                        doc_id=record["doc_id"],
                        source_kind=record["source_kind"],
                        tool_category=record["tool_category"],
                        title=record["title"],
                        text=record["text"],
                        metadata=dict(record.get("metadata", {})),
                    )
                )
            elif kind == "chunk":
                require_fields(record, line_no, "chunk_id", "doc_id", "ordinal", "text", "length_units", "tool_category")
                entries.append(
                    Chunk(
                        chunk_id=record["chunk_id"],
                        doc_id=record["doc_id"],
                        ordinal=record["ordinal"],
                        text=record["text"],
                        length_units=record["length_units"],
                        tool_category=record["tool_category"],
                    )
                )
            else:
                raise MalformedRecord(line_no, f"unknown record kind {kind!r}")
        except (ValueError, EmptyDocument) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return entries


def corpus_chunks(entries: list[Document | Chunk]) -> list[Chunk]:
    return [e for e in entries if isinstance(e, Chunk)]


def corpus_documents(entries: list[Document | Chunk]) -> list[Document]:
    return [e for e in entries if isinstance(e, Document)]
