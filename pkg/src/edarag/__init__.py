"""EDA-domain retrieval, dataset-construction, and evaluation toolkit."""

from .augment import AugmentConfig, ClozeItem, CorpusTermStats, McqItem
from .corpus import (
    BoundaryPreference,
    Chunk,
    ChunkingConfig,
    Document,
    SourceKind,
    ToolCategory,
    chunk_document,
    dedupe_corpus,
    ingest_document,
    read_corpus,
    write_corpus,
)
from .evaluation import (
    BenchmarkItem,
    Condition,
    EvalRecord,
    EvalReport,
    JudgeKind,
    Verdict,
    compute_metrics,
    load_benchmark,
    model_judge,
    oracle_judge,
    run_condition,
)
from .gateway import EmbeddingVector, GatewayConfig, ModelGateway, Transcript
from .retrieval import (
    Channel,
    HybridRetriever,
    LexicalIndex,
    RankedHit,
    VectorIndex,
    bm25_score,
    build_lexical_index,
    build_vector_index,
    fuse_rrf,
    lexical_search,
    rerank,
    vector_search,
)
from .scenarios import (
    PretrainOrigin,
    PretrainRecord,
    Provenance,
    QAPair,
    Scenario,
    ScenarioExample,
    SftRecord,
    build_rag_dataset,
    emit_pretraining_mix,
    emit_sft_dataset,
    retrieve_relevant,
    sample_irrelevant,
    subsample_partial,
)
from .text import normalize_text

__version__ = "0.1.0"
