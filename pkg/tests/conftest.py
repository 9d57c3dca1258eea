from __future__ import annotations

import random
from pathlib import Path

import pytest

from edarag.corpus import Chunk, corpus_chunks, make_chunk, read_corpus
from edarag.gateway import GatewayConfig, ModelGateway
from edarag.retrieval import HybridRetriever
from edarag.scenarios import QAPair

FIXTURES = Path(__file__).parent / "fixtures"

# categories cycled through synthetic corpora
_CATEGORIES = ["synthesis", "physical", "simulation", "dft"]

_FILLER_VOCAB = [
    "clock", "path", "cell", "net", "pin", "port", "delay", "margin", "stage", "buffer",
    "driver", "load", "wire", "layer", "track", "grid", "region", "group", "mode", "view",
    "check", "rule", "limit", "value", "report", "table", "field", "option", "switch", "flow",
    "step", "pass", "result", "status", "error", "warning", "count", "total", "ratio", "bound",
]


class ScriptedBackend:
    """Deterministic generate() backend returning queued responses in order."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.prompts = []

    def generate(self, prompt, params=None):
        self.prompts.append(prompt)
        if not self.responses:
            raise AssertionError("scripted backend exhausted")
        return self.responses.pop(0)


class ScriptedJudge:
    """Deterministic judge() backend returning queued verdict strings."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def judge(self, question, gold, predicted):
        self.calls.append((question, gold, predicted))
        if not self.responses:
            raise AssertionError("scripted judge exhausted")
        return self.responses.pop(0)


def build_synthetic_corpus(n_docs: int = 200, chunks_per_doc: int = 5, seed: int = 7) -> list[Chunk]:
    """Seeded corpus where doc d is identified by its topic term tool_cmd_<d>."""
    rng = random.Random(seed)
    chunks = []
    for d in range(n_docs):
        doc_id = f"sdoc{d:03d}"
        category = _CATEGORIES[d % len(_CATEGORIES)]
        topic = f"tool_cmd_{d}"
        for c in range(chunks_per_doc):
            words = [topic] + rng.choices(_FILLER_VOCAB, k=24)
            rng.shuffle(words)
            chunks.append(make_chunk(doc_id, c, " ".join(words) + ".", category))
    return chunks


def build_synthetic_qa(n_pairs: int = 100, seed: int = 11) -> list[QAPair]:
    rng = random.Random(seed)
    pairs = []
    for i in range(n_pairs):
        fillers = rng.sample(_FILLER_VOCAB, 2)
        pairs.append(
            QAPair(
                qa_id=f"sqa{i:03d}",
                question=f"tool_cmd_{i} {fillers[0]} {fillers[1]}",
                answer=f"tool_cmd_{i}",
                tool_category=_CATEGORIES[i % len(_CATEGORIES)],
            )
        )
    return pairs


@pytest.fixture(scope="session")
def stub_gateway() -> ModelGateway:
    return ModelGateway(GatewayConfig(mode="stub:echo"))


def ingest_raw_docs_corpus() -> list[Chunk]:
    """Ingest the raw_docs fixture the same way the CLI ingest command does."""
    from edarag.corpus import chunk_document, dedupe_corpus, ingest_document

    chunks = []
    for path in sorted((FIXTURES / "raw_docs").glob("*.txt")):
        doc = ingest_document(
            path.read_text(encoding="utf-8"), "tool_manual", "unknown", path.stem, doc_id=path.stem
        )
        chunks.extend(chunk_document(doc))
    return dedupe_corpus(chunks)


@pytest.fixture(scope="session")
def smoke_retriever(stub_gateway) -> HybridRetriever:
    return HybridRetriever(ingest_raw_docs_corpus(), stub_gateway)


@pytest.fixture(scope="session")
def f1_chunks() -> list[Chunk]:
    return corpus_chunks(read_corpus(FIXTURES / "f1_corpus.jsonl"))


@pytest.fixture(scope="session")
def f1_retriever(f1_chunks, stub_gateway) -> HybridRetriever:
    return HybridRetriever(f1_chunks, stub_gateway)
