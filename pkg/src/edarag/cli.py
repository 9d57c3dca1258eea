"""Command-line entry point wiring the pipeline stages into batch commands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 gateway error.
Warnings and logs go to stderr; machine-readable output goes to files.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import augment as augment_mod
from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import retrieval as retrieval_mod
from . import scenarios as scenarios_mod
from .config import PipelineConfig, load_config
from .errors import DataError, EdaRagError, GatewayError
from .gateway import ModelGateway

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep exit-code control in main()
        raise UsageError(message)


def _build_gateway(config: PipelineConfig, mode_override: str | None = None) -> ModelGateway:
    gw = config.gateway
    if mode_override:
        gw = dataclasses.replace(gw, mode=mode_override)
    return ModelGateway(gw)


def _load_retriever(args, config: PipelineConfig, gateway: ModelGateway) -> retrieval_mod.HybridRetriever:
    entries = corpus_mod.read_corpus(args.corpus)
    chunks = corpus_mod.corpus_chunks(entries)
    lexical = retrieval_mod.load_lexical_index(args.lexical) if getattr(args, "lexical", None) else None
    vector = retrieval_mod.load_vector_index(args.vector) if getattr(args, "vector", None) else None
    return retrieval_mod.HybridRetriever(
        chunks,
        gateway,
        k1=config.index.k1,
        b=config.index.b,
        rrf_k=config.index.k_f,
        pool_size=config.index.k_pool,
        lexical_index=lexical,
        vector_index=vector,
    )


# --- subcommands ---------------------------------------------------------------

def _cmd_ingest(args) -> int:
    config = load_config(args.config)
    chunking = config.chunking
    if args.target_size or args.overlap is not None or args.boundary:
        chunking = corpus_mod.ChunkingConfig(
            target_size=args.target_size or chunking.target_size,
            overlap=chunking.overlap if args.overlap is None else args.overlap,
            boundary_preference=args.boundary or chunking.boundary_preference,
        )
    raw_dir = Path(args.raw_dir)
    if not raw_dir.is_dir():
        raise DataError(f"raw dir {raw_dir} does not exist")
    entries: list = []
    all_chunks: list[corpus_mod.Chunk] = []
    docs = []
    for path in sorted(raw_dir.glob("*.txt")):
        doc = corpus_mod.ingest_document(
            path.read_text(encoding="utf-8"),
            source_kind=args.source_kind,
            tool_category=args.tool_category,
            title=path.stem,
            doc_id=path.stem,
        )
        docs.append(doc)
    if not docs:
        raise DataError(f"no .txt documents found in {raw_dir}")
    for doc in sorted(docs, key=lambda d: d.doc_id):
        entries.append(doc)
        all_chunks.extend(corpus_mod.chunk_document(doc, chunking))
    kept = corpus_mod.dedupe_corpus(all_chunks)
    dropped = len(all_chunks) - len(kept)
    if dropped:
        logger.warning("dropped %d duplicate chunks", dropped)
    corpus_mod.write_corpus(entries + kept, args.out)
    logger.info("wrote %d documents and %d chunks to %s", len(docs), len(kept), args.out)
    return 0


def _cmd_index(args) -> int:
    config = load_config(args.config)
    chunks = corpus_mod.corpus_chunks(corpus_mod.read_corpus(args.corpus))
    lexical = retrieval_mod.build_lexical_index(chunks, k1=config.index.k1, b=config.index.b)
    retrieval_mod.save_lexical_index(lexical, args.out_lexical)
    gateway = _build_gateway(config, args.gateway_mode)
    vector = retrieval_mod.build_vector_index(chunks, gateway)
    retrieval_mod.save_vector_index(vector, args.out_vector)
    logger.info("indexed %d chunks", len(chunks))
    return 0


def _cmd_retrieve(args) -> int:
    config = load_config(args.config)
    gateway = _build_gateway(config, args.gateway_mode)
    retriever = _load_retriever(args, config, gateway)
    hits = retriever.retrieve(args.query, args.k)
    for hit in hits:
        print(f"{hit.rank}\t{hit.score:.6f}\t{hit.channel.value}\t{hit.chunk_id}")
    return 0


def _cmd_augment(args) -> int:
    config = load_config(args.config)
    chunks = corpus_mod.corpus_chunks(corpus_mod.read_corpus(args.corpus))
    strategies = args.strategies.split(",") if args.strategies else config.augment.strategies
    aug_config = augment_mod.AugmentConfig(
        strategies=strategies,
        qa_per_chunk=args.qa_per_chunk or config.augment.qa_per_chunk,
        seed=config.augment.seed if args.seed is None else args.seed,
        backend=config.augment.backend,
    )
    gateway = _build_gateway(config, args.gateway_mode or aug_config.backend)
    records = augment_mod.assemble_augmented_corpus(chunks, gateway, aug_config)
    scenarios_mod.write_pretrain_dataset(records, args.out)
    logger.info("wrote %d augmented records to %s", len(records), args.out)
    return 0


def _cmd_build_scenarios(args) -> int:
    config = load_config(args.config)
    k = args.k or config.scenario.k
    ratio = args.ratio if args.ratio is not None else config.scenario.ratio
    seed = config.scenario.seed if args.seed is None else args.seed
    gateway = _build_gateway(config, args.gateway_mode)
    retriever = _load_retriever(args, config, gateway)
    pairs = scenarios_mod.read_qa_dataset(args.qa)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    examples = scenarios_mod.build_rag_dataset(pairs, retriever, k=k, ratio=ratio, seed=seed)
    scenarios_mod.write_scenario_dataset(examples, out_dir / "scenarios.jsonl")
    scenarios_mod.write_sft_dataset(scenarios_mod.emit_sft_dataset(pairs), out_dir / "sft.jsonl")
    augmented = scenarios_mod.read_pretrain_dataset(args.augmented) if args.augmented else []
    mix = config.scenario.pretrain_mix
    pretrain = scenarios_mod.emit_pretraining_mix(retriever.chunks, augmented, mix, seed=seed)
    scenarios_mod.write_pretrain_dataset(pretrain, out_dir / "pretrain.jsonl")
    logger.info(
        "wrote %d scenario, %d sft, %d pretraining records to %s",
        len(examples), len(pairs), len(pretrain), out_dir,
    )
    return 0


def _cmd_evaluate(args) -> int:
    config = load_config(args.config)
    seed = config.eval.seed if args.seed is None else args.seed
    conditions = args.conditions.split(",") if args.conditions else config.eval.conditions
    items = eval_mod.load_benchmark(args.benchmark)
    model = _build_gateway(config, args.gateway_mode)
    corpus = None
    if args.corpus:
        corpus = _load_retriever(args, config, model)
    judge = args.judge or config.eval.judge
    judge_gateway = model if judge == "model" else None
    records: list[eval_mod.EvalRecord] = []
    for condition in conditions:
        records.extend(
            eval_mod.run_condition(
                items, condition, model, corpus=corpus, seed=seed, judge=judge, judge_gateway=judge_gateway
            )
        )
    eval_mod.write_eval_records(records, args.out)
    logger.info("wrote %d evaluation records to %s", len(records), args.out)
    return 0


def _cmd_report(args) -> int:
    config = load_config(args.config)
    records = eval_mod.read_eval_records(args.records)
    items = eval_mod.load_benchmark(args.benchmark) if args.benchmark else None
    report = eval_mod.compute_metrics(records, items=items, config_fingerprint=config.fingerprint())
    if args.format == "machine":
        if not args.out:
            raise UsageError("--out is required for machine format")
        eval_mod.render_report(report, args.out, "machine")
    else:
        rendered = eval_mod.render_report(report, args.out, "text_table")
        print(rendered, end="")
    return 0


# --- parser ---------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="edarag", description="EDA-domain retrieval, dataset, and evaluation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--gateway-mode", help="override gateway mode, e.g. stub:echo")

    p = sub.add_parser("ingest", help="ingest a directory of raw .txt documents into a corpus file")
    common(p)
    p.add_argument("--raw-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-kind", default="tool_manual", choices=[k.value for k in corpus_mod.SourceKind])
    p.add_argument("--tool-category", default="unknown", choices=[c.value for c in corpus_mod.ToolCategory])
    p.add_argument("--target-size", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--boundary", choices=[b.value for b in corpus_mod.BoundaryPreference])
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("index", help="build lexical and vector indexes from a corpus file")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-lexical", required=True)
    p.add_argument("--out-vector", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("retrieve", help="run one hybrid query and print ranked hits")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexical", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("augment", help="emit augmented pretraining records from a corpus")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategies", help="comma list: qa,rewrite,cloze,mcq")
    p.add_argument("--qa-per-chunk", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("build-scenarios", help="build scenario, sft, and pretraining dataset files")
    common(p)
    p.add_argument("--qa", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexical", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--augmented", help="augmented records to blend into the pretraining mix")
    p.add_argument("-k", type=int)
    p.add_argument("--ratio", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_build_scenarios)

    p = sub.add_parser("evaluate", help="run benchmark conditions against a model")
    common(p)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus")
    p.add_argument("--lexical")
    p.add_argument("--vector")
    p.add_argument("--conditions", help="comma list from: none,correct_ctx,irrelevant_ctx")
    p.add_argument("--judge", choices=["oracle", "model"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="aggregate evaluation records into a metrics report")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--benchmark")
    p.add_argument("--format", choices=["text_table", "machine"], default="text_table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GatewayError as exc:
        print(f"gateway error: {exc}", file=sys.stderr)
        return 3
    except (EdaRagError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
