#!/usr/bin/env python3
"""Run the full pipeline end to end over the shipped fixtures.

ingest -> index -> build-scenarios -> evaluate (offline stub model) -> report

Usage: python3 scripts/smoke_pipeline.py [workdir]
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

from edarag.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def run(argv: list[str]) -> None:
    print("$ edarag " + " ".join(argv))
    code = main(argv)
    if code != 0:
        sys.exit(code)


def main_script() -> None:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("smoke_run")
    workdir.mkdir(parents=True, exist_ok=True)
    corpus = workdir / "corpus.jsonl"
    lex, vec = workdir / "lexical_index.jsonl", workdir / "vector_index.jsonl"
    records = workdir / "eval_records.jsonl"

    start = time.perf_counter()
    run(["ingest", "--raw-dir", str(FIXTURES / "raw_docs"), "--out", str(corpus)])
    run(["index", "--corpus", str(corpus), "--out-lexical", str(lex), "--out-vector", str(vec)])
    run(
        [
            "build-scenarios",
            "--qa", str(FIXTURES / "qa_smoke.jsonl"),
            "--corpus", str(corpus),
            "--lexical", str(lex),
            "--vector", str(vec),
            "--out-dir", str(workdir / "datasets"),
            "--seed", "42",
        ]
    )
    run(
        [
            "evaluate",
            "--benchmark", str(FIXTURES / "benchmark.jsonl"),
            "--corpus", str(corpus),
            "--lexical", str(lex),
            "--vector", str(vec),
            "--out", str(records),
            "--gateway-mode", "stub:context_reader",
            "--seed", "3",
        ]
    )
    run(["report", "--records", str(records), "--benchmark", str(FIXTURES / "benchmark.jsonl")])
    run(
        [
            "report",
            "--records", str(records),
            "--format", "machine",
            "--out", str(workdir / "report.json"),
        ]
    )
    print(f"\nsmoke pipeline finished in {time.perf_counter() - start:.2f}s; artifacts in {workdir}/")


if __name__ == "__main__":
    main_script()
