#!/usr/bin/env python3
"""Demonstrate that the harness separates two model behaviors.

A context-reading model converts correct retrieved context into answers, so
its retrieval gain is +100.0; a context-ignoring model that only knows a
memorized subset shows a gain of exactly 0.0. The second pattern is what a
harness must be able to detect: retrieval stops helping once a model leans
entirely on what it already knows.
"""
from __future__ import annotations

from pathlib import Path

from edarag.corpus import chunk_document, dedupe_corpus, ingest_document
from edarag.evaluation import compute_metrics, load_benchmark, render_text_table, run_condition
from edarag.gateway import GatewayConfig, ModelGateway
from edarag.retrieval import HybridRetriever

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
CONDITIONS = ["none", "correct_ctx", "irrelevant_ctx"]


def build_retriever() -> HybridRetriever:
    chunks = []
    for path in sorted((FIXTURES / "raw_docs").glob("*.txt")):
        doc = ingest_document(path.read_text(encoding="utf-8"), "tool_manual", "unknown", path.stem, doc_id=path.stem)
        chunks.extend(chunk_document(doc))
    return HybridRetriever(dedupe_corpus(chunks), ModelGateway(GatewayConfig(mode="stub:echo")))


def evaluate(model: ModelGateway, retriever: HybridRetriever) -> str:
    items = load_benchmark(FIXTURES / "benchmark.jsonl")
    records = []
    for condition in CONDITIONS:
        records.extend(run_condition(items, condition, model, corpus=retriever, seed=3))
    return render_text_table(compute_metrics(records))


def main() -> None:
    retriever = build_retriever()
    items = load_benchmark(FIXTURES / "benchmark.jsonl")

    print("=== context-reading model (uses retrieved documents) ===")
    reader = ModelGateway(GatewayConfig(mode="stub:context_reader"))
    print(evaluate(reader, retriever))

    print("=== context-ignoring model (memorized subset only) ===")
    memory = {item.question: item.gold_answer for item in items[:2]}
    biased = ModelGateway(GatewayConfig(mode="stub:parametric_bias"), stub_memory=memory)
    print(evaluate(biased, retriever))


if __name__ == "__main__":
    main()
