#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures under tests/fixtures/.

Outputs are deterministic, so reruns leave the tree unchanged unless the
fixture definitions below are edited.
"""
from __future__ import annotations

from pathlib import Path

from edarag.corpus import make_chunk, write_corpus
from edarag.evaluation import BenchmarkItem, write_benchmark
from edarag.scenarios import QAPair, write_qa_dataset

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# --- F1: controlled 20-chunk corpus for retrieval and augmentation tests --------

F1_DOCS = {
    ("sta-guide", "physical"): [
        "The report_timing command reports slack.",
        "Static timing analysis verifies setup and hold requirements across corners.",
        "Launch and capture edges define the timing window. Negative slack means the path fails its constraint.",
        "Multi-corner analysis repeats the checks for each process voltage temperature corner.",
    ],
    ("dft-manual", "dft"): [
        "Scan chain insertion stitches sequential cells into shift registers for test access.",
        "The insert_dft command builds scan chains and reports stitching statistics.",
        "Automatic test pattern generation targets stuck-at faults and measures coverage.",
        "Test compression reduces pattern count while keeping fault coverage high.",
    ],
    ("synth-flow", "synthesis"): [
        "Logic synthesis maps register transfer level code onto a technology library netlist.",
        "The compile_ultra command optimizes the netlist for area and timing. Reports summarize gate counts.",
        "Constraint files set clocks false paths and multicycle exceptions with set_false_path and create_clock.",
    ],
    ("sim-handbook", "simulation"): [
        "Functional simulation executes the testbench and compares outputs against expectations.",
        "Waveform dumps record signal transitions for postmortem debugging sessions.",
        "Assertions capture protocol rules and fire when a violation occurs during simulation.",
    ],
    ("power-notes", "physical"): [
        "Leakage optimization swaps high threshold cells on paths with positive slack margin.",
        "Power gating shuts down idle blocks and retention registers preserve state.",
    ],
    ("route-tips", "physical"): [
        "Detailed routing resolves shorts and spacing violations after global route estimation.",
        "Antenna rules limit charge accumulation on long metal segments during fabrication.",
    ],
    ("pkg-overview", "unknown"): [
        "Package substrate design distributes power through bump arrays and plane layers.",
        "Thermal models estimate junction temperature under sustained workload conditions.",
    ],
}

F1_QA = [
    QAPair(
        qa_id="qa1",
        question="report_timing slack corners",
        answer="report_timing",
        tool_category="physical",
        reasoning="slack is printed by the timing report command",
        gold_chunk_ids=["sta-guide#0"],
    ),
    QAPair(
        qa_id="qa2",
        question="scan chain insertion coverage",
        answer="insert_dft",
        tool_category="dft",
        gold_chunk_ids=["dft-manual#0"],
    ),
    QAPair(
        qa_id="qa3",
        question="compile_ultra netlist area",
        answer="compile_ultra",
        tool_category="synthesis",
        gold_chunk_ids=["synth-flow#1"],
    ),
]

# --- raw documents for the ingest -> evaluate smoke path --------------------------
#
# Each document carries an "answer=<term>" marker that the context_reader stub
# model extracts; vocabularies are kept disjoint across topics so irrelevant
# sampling always has a pool.

RAW_DOCS = {
    "sta_timing": (
        "Timing closure workflow.\n"
        "\n"
        "The report_timing command prints the worst setup slack of each path group.\n"
        "Launch and capture points bound every measured path. answer=report_timing\n"
        "\n"
        "Negative slack requires either logic restructuring or constraint review.\n"
    ),
    "scan_dft": (
        "Testability insertion manual.\n"
        "\n"
        "Run insert_dft to build a scan_chain through every sequential element.\n"
        "Stitching order affects shift wirelength. answer=insert_dft\n"
        "\n"
        "After insertion, atpg produces vectors and reports fault coverage.\n"
    ),
    "rtl_synthesis": (
        "Synthesis handbook.\n"
        "\n"
        "compile_ultra performs mapping from RTL onto the target gate library,\n"
        "producing an optimized netlist. answer=compile_ultra\n"
        "\n"
        "Gate sizing balances area against delay during mapping.\n"
    ),
    "sim_debug": (
        "Simulation debug notes.\n"
        "\n"
        "Invoke vcs_run with dump enabled to record a waveform of the testbench.\n"
        "Replay the waveform viewer to inspect signal transitions. answer=vcs_run\n"
        "\n"
        "Assertion failures stop the run at the offending cycle.\n"
    ),
    "power_opt": (
        "Power optimization guide.\n"
        "\n"
        "Leakage recovery uses vt_swap to move cells onto a higher threshold\n"
        "where margin allows. answer=vt_swap\n"
        "\n"
        "Retention registers keep state while surrounding logic powers down.\n"
    ),
    "floorplan": (
        "Floorplanning basics.\n"
        "\n"
        "Macro location fixes large blocks early; placement_blockage keeps\n"
        "standard cells out of reserved regions. answer=placement_blockage\n"
        "\n"
        "Halo spacing around each macro protects routing resources, and overall\n"
        "utilization targets leave room for later ECO work.\n"
    ),
}

# topic filler with vocabulary disjoint from every benchmark question, so the
# irrelevant-sampling pool never runs dry on this small corpus
RAW_DOCS.update(
    {
        "library_prep": (
            "Library preparation.\n"
            "\n"
            "Characterized cells arrive as liberty views with lookup tables for\n"
            "delay and transition behavior across process corners.\n"
        ),
        "upf_intent": (
            "Power intent description.\n"
            "\n"
            "Supply networks, isolation strategies, and level shifter policies\n"
            "live in a unified power format file read before implementation.\n"
        ),
        "lint_checks": (
            "Code quality screening.\n"
            "\n"
            "Structural lint flags latch inference, undriven nets, and width\n"
            "mismatches before any downstream flow consumes the RTL source.\n"
        ),
        "em_ir_sign": (
            "Reliability signoff notes.\n"
            "\n"
            "Electromigration limits and voltage drop budgets are verified on\n"
            "the final routed database with extracted parasitics.\n"
        ),
    }
)

# duplicate-content document: its chunk must be dropped by dedupe during ingest
RAW_DOCS["floorplan_copy"] = RAW_DOCS["floorplan"]

SMOKE_QA = [
    QAPair(
        qa_id="sq1",
        question="report_timing setup slack",
        answer="report_timing",
        tool_category="physical",
        reasoning="the timing report command prints slack",
        gold_chunk_ids=["sta_timing#0"],
    ),
    QAPair(
        qa_id="sq2",
        question="scan_chain stitching atpg",
        answer="insert_dft",
        tool_category="dft",
        gold_chunk_ids=["scan_dft#0"],
    ),
    QAPair(
        qa_id="sq3",
        question="vcs_run waveform testbench",
        answer="vcs_run",
        tool_category="simulation",
        gold_chunk_ids=["sim_debug#0"],
    ),
]

SMOKE_BENCHMARK = [
    BenchmarkItem("e1", "report_timing setup slack", "report_timing", "physical", ["sta_timing#0"]),
    BenchmarkItem("e2", "scan_chain stitching atpg", "insert_dft", "dft", ["scan_dft#0"]),
    BenchmarkItem("e3", "compile_ultra gate mapping", "compile_ultra", "synthesis", ["rtl_synthesis#0"]),
    BenchmarkItem("e4", "vcs_run waveform testbench", "vcs_run", "simulation", ["sim_debug#0"]),
    BenchmarkItem("e5", "vt_swap threshold retention", "vt_swap", "physical", ["power_opt#0"]),
    BenchmarkItem("e6", "macro halo utilization", "placement_blockage", "physical", ["floorplan#0"]),
]

# --- normalization golden pair ------------------------------------------------------

NORMALIZE_RAW = (
    "Scan  \tinsertion \t guide\r\n"
    "\r\n"
    "\r\n"
    "\r\n"
    "  Chains are stitched\tin order.  \r"
    "Coverage is  reported\r\n"
    "after  ATPG.\r\n"
)

# hand-derived target of the normalization rules above
NORMALIZE_GOLDEN = (
    "Scan insertion guide\n"
    "\n"
    "Chains are stitched in order.\n"
    "Coverage is reported\n"
    "after ATPG."
)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "raw_docs").mkdir(exist_ok=True)
    (FIXTURES / "normalize").mkdir(exist_ok=True)

    chunks = []
    for (doc_id, category), texts in F1_DOCS.items():
        for ordinal, text in enumerate(texts):
            chunks.append(make_chunk(doc_id, ordinal, text, category))
    assert len(chunks) == 20, f"F1 must stay at 20 chunks, got {len(chunks)}"
    write_corpus(chunks, FIXTURES / "f1_corpus.jsonl")

    write_qa_dataset(F1_QA, FIXTURES / "qa_f1.jsonl")
    write_qa_dataset(SMOKE_QA, FIXTURES / "qa_smoke.jsonl")

    for name, text in RAW_DOCS.items():
        (FIXTURES / "raw_docs" / f"{name}.txt").write_text(text, encoding="utf-8")

    write_benchmark(SMOKE_BENCHMARK, FIXTURES / "benchmark.jsonl")

    (FIXTURES / "normalize" / "messy_raw.txt").write_bytes(NORMALIZE_RAW.encode("utf-8"))
    (FIXTURES / "normalize" / "messy_golden.txt").write_bytes(NORMALIZE_GOLDEN.encode("utf-8"))

    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
