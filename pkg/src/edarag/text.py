"""Text normalization, index-term tokenization, and deterministic hashing.

Index terms keep underscores and hyphens inside a term so tool command names
(``report_timing``, ``set-max-delay``) survive as single retrieval units.
"""
from __future__ import annotations

import hashlib
import re
import unicodedata

# term = run of word chars or hyphens; everything else splits
_TERM_RE = re.compile(r"[\w-]+")
_SPACE_RUN_RE = re.compile(r"[ \t]+")
_BLANK_RUN_RE = re.compile(r"\n{4,}")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")

STOPWORDS = frozenset(
    """a an and are as at be been by for from in into is it its of on or
    than that the then this to was were when with""".split()
)


def normalize_text(raw: str) -> str:
    """Normalize raw text to the corpus form.

    Unicode NFC, line endings mapped to ``\\n``, runs of spaces/tabs collapsed
    to a single space, each line stripped, and runs of three or more blank
    lines collapsed to one. Idempotent.
    """
    text = unicodedata.normalize("NFC", raw)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = [_SPACE_RUN_RE.sub(" ", line).strip() for line in text.split("\n")]
    text = "\n".join(lines)
    text = _BLANK_RUN_RE.sub("\n\n", text)
    return text.strip("\n")


def index_terms(text: str) -> list[str]:
    """Lowercased index terms of ``text``, in occurrence order."""
    return _TERM_RE.findall(text.lower())


def term_spans(text: str) -> list[tuple[str, int, int]]:
    """``(surface, start, end)`` for each index term, preserving case."""
    return [(m.group(), m.start(), m.end()) for m in _TERM_RE.finditer(text)]


def count_terms(text: str) -> int:
    return len(_TERM_RE.findall(text))


def split_sentences(text: str) -> list[str]:
    """Heuristic sentence segmentation: break after .!? and at newlines."""
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [p.strip() for p in parts if p and p.strip()]


def stable_u64(*parts) -> int:
    """Platform-stable 64-bit hash of the stringified parts.

    Used wherever a derived seed or fingerprint must be identical across
    runs, platforms, and Python versions (``hash()`` is salted; this is not).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def text_digest(text: str) -> str:
    """Hex digest of normalized text, the dedupe identity of a chunk."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()
