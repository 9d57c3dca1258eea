import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edarag.corpus import make_chunk
from edarag.errors import DimensionMismatch, DuplicateChunkId, EmptyCorpus, GatewayFailure, RerankerFailure
from edarag.gateway import EmbeddingVector, GatewayConfig, ModelGateway, _term_bucket, hashed_bag_embedding
from edarag.retrieval import (
    Channel,
    HybridRetriever,
    RankedHit,
    VectorIndex,
    bm25_score,
    build_lexical_index,
    build_vector_index,
    cosine_similarity,
    fuse_rrf,
    lexical_search,
    load_lexical_index,
    load_vector_index,
    rerank,
    save_lexical_index,
    save_vector_index,
    vector_search,
)
from edarag.text import index_terms

from oracles import (
    bm25_closed_form,
    brute_force_lexical_ranking,
    composed_hybrid_ranking,
    hand_rrf,
    terms,
)


def assert_ranked_contract(hits):
    """ranks 1..n, scores non-increasing, ties by ascending chunk_id."""
    assert [h.rank for h in hits] == list(range(1, len(hits) + 1))
    for a, b in zip(hits, hits[1:]):
        assert a.score >= b.score
        if a.score == b.score:
            assert a.chunk_id < b.chunk_id
        assert b.score > 0.0
    if hits:
        assert hits[0].score > 0.0


def collision_free_query(chunks, n_terms=2):
    """Nonsense terms whose hash buckets miss every corpus term's bucket."""
    corpus_buckets = {_term_bucket(t, 256) for c in chunks for t in index_terms(c.text)}
    picked = []
    i = 0
    while len(picked) < n_terms:
        candidate = f"zzznoise{i}"
        if _term_bucket(candidate, 256) not in corpus_buckets:
            picked.append(candidate)
        i += 1
        assert i < 5000
    return " ".join(picked)


class TestBuildLexicalIndex:
    def test_stats_are_definitional(self):
        chunks = [
            make_chunk("a", 0, "one two three", "unknown"),
            make_chunk("b", 0, "one two three four five", "unknown"),
            make_chunk("c", 0, "one", "unknown"),
        ]
        index = build_lexical_index(chunks)
        assert index.chunk_count == 3
        assert index.avg_length == pytest.approx((3 + 5 + 1) / 3)
        assert index.doc_lengths == {"a#0": 3, "b#0": 5, "c#0": 1}

    def test_duplicate_chunk_id_rejected(self):
        chunk = make_chunk("a", 0, "text here", "unknown")
        with pytest.raises(DuplicateChunkId):
            build_lexical_index([chunk, chunk])

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            build_lexical_index([])

    def test_postings_match_brute_force_counts(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        # oracle: naive per-chunk term counting
        expected: dict[str, dict[str, int]] = {}
        for chunk in f1_chunks:
            for term in terms(chunk.text):
                expected.setdefault(term, {}).setdefault(chunk.chunk_id, 0)
                expected[term][chunk.chunk_id] += 1
        assert set(index.postings) == set(expected)
        for term, entries in index.postings.items():
            assert dict(entries) == expected[term]


class TestBm25Score:
    def _point_check_corpus(self):
        filler = [f"f{i}" for i in range(98)]
        a = make_chunk("a", 0, "target target " + " ".join(filler), "unknown")
        b = make_chunk("b", 0, " ".join(f"g{i}" for i in range(100)), "unknown")
        c = make_chunk("c", 0, " ".join(f"h{i}" for i in range(100)), "unknown")
        return [a, b, c]

    def test_hand_computed_point_value(self):
        # N=3, df=1, tf=2, dl=avgdl=100, k1=1.2, b=0.75:
        # idf = ln(1 + 2.5/1.5), tf part = 4.4/3.2 -> 1.3486
        chunks = self._point_check_corpus()
        index = build_lexical_index(chunks, k1=1.2, b=0.75)
        tf = {"target": 2}
        score = bm25_score(tf, 100, ["target"], index)
        assert score == pytest.approx(1.3486, abs=1e-3)
        expected = math.log(1 + 2.5 / 1.5) * (2 * 2.2) / (2 + 1.2)
        assert score == pytest.approx(expected, rel=1e-12)

    def test_absent_terms_contribute_zero(self):
        chunks = self._point_check_corpus()
        index = build_lexical_index(chunks)
        assert bm25_score({"target": 2}, 100, ["missing"], index) == 0.0
        assert bm25_score({}, 100, ["missing", "also-missing"], index) == 0.0

    def test_duplicate_query_terms_count_twice(self):
        chunks = self._point_check_corpus()
        index = build_lexical_index(chunks)
        single = bm25_score({"target": 2}, 100, ["target"], index)
        double = bm25_score({"target": 2}, 100, ["target", "target"], index)
        assert double == pytest.approx(2 * single)

    def test_matches_closed_form_oracle_on_f1(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        all_chunk_terms = {c.chunk_id: terms(c.text) for c in f1_chunks}
        avg = sum(c.length_units for c in f1_chunks) / len(f1_chunks)
        rng = random.Random(3)
        vocab = sorted({t for ts in all_chunk_terms.values() for t in ts})
        for _ in range(50):
            query_terms = rng.sample(vocab, rng.randint(1, 4))
            for chunk in f1_chunks:
                tf: dict[str, int] = {}
                for t in terms(chunk.text):
                    tf[t] = tf.get(t, 0) + 1
                got = bm25_score(tf, chunk.length_units, query_terms, index)
                want = bm25_closed_form(
                    query_terms, all_chunk_terms[chunk.chunk_id], chunk.length_units, all_chunk_terms, avg
                )
                assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestLexicalSearch:
    def test_no_corpus_term_gives_empty_list(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        assert lexical_search(index, "qqqq wwww absentterm", 5) == []

    def test_k_larger_than_corpus_returns_positive_only(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        hits = lexical_search(index, "slack", 1000)
        brute = brute_force_lexical_ranking(
            "slack",
            {c.chunk_id: c.text for c in f1_chunks},
            {c.chunk_id: c.length_units for c in f1_chunks},
            1000,
        )
        assert len(hits) == len(brute)
        assert all(h.score > 0 for h in hits)

    def test_ranking_matches_brute_force_oracle(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        chunk_texts = {c.chunk_id: c.text for c in f1_chunks}
        chunk_lengths = {c.chunk_id: c.length_units for c in f1_chunks}
        vocab = sorted({t for c in f1_chunks for t in terms(c.text)})
        rng = random.Random(17)
        for _ in range(50):
            query = " ".join(rng.sample(vocab, rng.randint(1, 5)))
            hits = lexical_search(index, query, 10)
            brute = brute_force_lexical_ranking(query, chunk_texts, chunk_lengths, 10)
            assert [h.chunk_id for h in hits] == [cid for cid, _ in brute]
            for hit, (_, score) in zip(hits, brute):
                assert hit.score == pytest.approx(score, rel=1e-9)
            assert_ranked_contract(hits)

    def test_fixture_query_from_examples(self, f1_chunks):
        index = build_lexical_index(f1_chunks)
        hits = lexical_search(index, "scan chain insertion", 3)
        brute = brute_force_lexical_ranking(
            "scan chain insertion",
            {c.chunk_id: c.text for c in f1_chunks},
            {c.chunk_id: c.length_units for c in f1_chunks},
            3,
        )
        assert [h.chunk_id for h in hits] == [cid for cid, _ in brute]
        assert hits[0].chunk_id == "dft-manual#0"

    @given(
        corpus=st.lists(
            st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=12),
            min_size=1,
            max_size=15,
        ),
        query=st.lists(st.sampled_from("abcdefghz"), min_size=1, max_size=4),
    )
    @settings(max_examples=60, deadline=None)
    def test_ranked_contract_on_random_corpora(self, corpus, query):
        chunks = [make_chunk(f"d{i}", 0, " ".join(words), "unknown") for i, words in enumerate(corpus)]
        index = build_lexical_index(chunks)
        hits = lexical_search(index, " ".join(query), 8)
        assert_ranked_contract(hits)


class TestVectorSearch:
    def test_stored_vector_query_ranks_first_with_unit_score(self, f1_chunks, stub_gateway):
        index = build_vector_index(f1_chunks, stub_gateway)
        target = f1_chunks[4]
        hits = vector_search(index, stub_gateway.embed(target.text), 3)
        assert hits[0].chunk_id == target.chunk_id
        assert hits[0].score == pytest.approx(1.0)

    def test_orthogonal_vectors_score_zero(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0

    def test_hand_computed_three_dim_ranking(self):
        index = VectorIndex(["c1", "c2", "c3"], np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]]))
        hits = vector_search(index, np.array([1.0, 0.0, 0.0]), 3)
        # cosines by hand: c1 = 1.0, c3 = 0.6, c2 = 0.0 (dropped)
        assert [(h.chunk_id, pytest.approx(h.score)) for h in hits] == [("c1", 1.0), ("c3", 0.6)]

    def test_dimension_mismatch(self):
        index = VectorIndex(["c1"], np.array([[1.0, 0.0]]))
        with pytest.raises(DimensionMismatch):
            vector_search(index, np.array([1.0, 0.0, 0.0]), 1)

    def test_zero_query_vector_gives_empty(self, f1_chunks, stub_gateway):
        index = build_vector_index(f1_chunks, stub_gateway)
        assert vector_search(index, np.zeros(index.dimension), 5) == []

    def test_random_unique_vectors_self_retrieval(self):
        rng = np.random.default_rng(5)
        matrix = rng.normal(size=(10, 16))
        index = VectorIndex([f"c{i}" for i in range(10)], matrix)
        for i in range(10):
            hits = vector_search(index, matrix[i], 1)
            assert hits[0].chunk_id == f"c{i}"
            assert hits[0].score == pytest.approx(1.0)


class TestVectorIndexBuild:
    def test_embedder_failure_propagates(self, f1_chunks):
        class FailingEmbedder:
            def embed(self, text):
                raise GatewayFailure("timeout", attempts=1)

        with pytest.raises(GatewayFailure):
            build_vector_index(f1_chunks, FailingEmbedder())

    def test_mixed_dimensions_rejected(self):
        class WobblyEmbedder:
            def __init__(self):
                self.dim = 2

            def embed(self, text):
                self.dim += 1
                return EmbeddingVector(np.ones(self.dim))

        chunks = [make_chunk("a", 0, "first text", "unknown"), make_chunk("b", 0, "second text", "unknown")]
        with pytest.raises(DimensionMismatch):
            build_vector_index(chunks, WobblyEmbedder())


class TestFuseRrf:
    def _hits(self, ids, channel=Channel.LEXICAL):
        return [RankedHit(cid, 1.0 / rank, rank, channel) for rank, cid in enumerate(ids, 1)]

    def test_rank_one_in_both_lists(self):
        fused = fuse_rrf(self._hits(["c1"]), self._hits(["c1"], Channel.VECTOR), k_f=60)
        assert fused[0].score == pytest.approx(2 / 61)

    def test_hand_evaluated_fusion_with_tie_break(self):
        fused = fuse_rrf(self._hits(["c1", "c2", "c3"]), self._hits(["c2", "c1", "c4"], Channel.VECTOR), k_f=60)
        assert [h.chunk_id for h in fused] == ["c1", "c2", "c3", "c4"]
        want = {"c1": 1 / 61 + 1 / 62, "c2": 1 / 62 + 1 / 61, "c3": 1 / 63, "c4": 1 / 63}
        for hit in fused:
            assert hit.score == pytest.approx(want[hit.chunk_id], rel=1e-12)
        assert_ranked_contract(fused)

    def test_one_empty_list_preserves_other_order(self):
        lex = self._hits(["x", "y", "z"])
        fused = fuse_rrf(lex, [], k_f=60)
        assert [h.chunk_id for h in fused] == ["x", "y", "z"]

    def test_matches_hand_summed_oracle_on_random_lists(self):
        rng = random.Random(23)
        universe = [f"c{i:02d}" for i in range(30)]
        for _ in range(100):
            lex_ids = rng.sample(universe, rng.randint(0, 12))
            vec_ids = rng.sample(universe, rng.randint(0, 12))
            fused = fuse_rrf(self._hits(lex_ids), self._hits(vec_ids, Channel.VECTOR), k_f=60)
            want = hand_rrf([lex_ids, vec_ids], k_f=60)
            assert [(h.chunk_id, pytest.approx(h.score, rel=1e-12)) for h in fused] == [
                (cid, pytest.approx(s, rel=1e-12)) for cid, s in want
            ]

    @given(
        lex=st.lists(st.sampled_from([f"c{i}" for i in range(12)]), unique=True, max_size=10),
        vec=st.lists(st.sampled_from([f"c{i}" for i in range(12)]), unique=True, max_size=10),
    )
    @settings(max_examples=80)
    def test_contract_and_storage_order_invariance(self, lex, vec):
        lex_hits = self._hits(lex)
        vec_hits = self._hits(vec, Channel.VECTOR)
        fused = fuse_rrf(lex_hits, vec_hits)
        assert_ranked_contract(fused)
        # only ranks matter, not list storage order
        shuffled = list(reversed(lex_hits))
        assert fuse_rrf(shuffled, vec_hits) == fused


class TestRerank:
    def test_fully_contained_query_scores_one(self):
        texts = {"a": "the scan chain insertion flow", "b": "unrelated words only"}
        hits = [RankedHit("b", 0.9, 1, Channel.FUSED), RankedHit("a", 0.8, 2, Channel.FUSED)]
        out = rerank("scan chain insertion", hits, texts)
        assert out[0].chunk_id == "a"
        assert out[0].score == pytest.approx(1.0)
        assert out[0].channel is Channel.RERANKED

    def test_all_zero_scores_preserve_fused_order(self):
        texts = {"a": "alpha", "b": "beta", "c": "gamma"}
        hits = [RankedHit(c, 1.0 - i * 0.1, i + 1, Channel.FUSED) for i, c in enumerate(["b", "c", "a"])]
        out = rerank("missing terms", hits, texts)
        assert [h.chunk_id for h in out] == ["b", "c", "a"]

    def test_hand_counted_overlap_fractions(self):
        texts = {
            "a": "scan chain insertion stitches cells",
            "b": "scan coverage report",
            "c": "timing closure loop",
        }
        hits = [RankedHit(c, 0.5, i + 1, Channel.FUSED) for i, c in enumerate(["a", "b", "c"])]
        out = rerank("scan chain coverage", hits, texts)
        # by hand: a = 2/3, b = 2/3 (tie keeps fused order), c = 0/3
        assert [h.chunk_id for h in out] == ["a", "b", "c"]
        assert out[0].score == pytest.approx(2 / 3)
        assert out[1].score == pytest.approx(2 / 3)
        assert out[2].score == 0.0

    def test_external_mode_uses_scorer_and_wraps_failures(self):
        texts = {"a": "text"}
        hits = [RankedHit("a", 1.0, 1, Channel.FUSED)]
        out = rerank("q", hits, texts, mode="external", scorer=lambda q, t: 0.25)
        assert out[0].score == 0.25

        def broken(q, t):
            raise RuntimeError("backend down")

        with pytest.raises(RerankerFailure):
            rerank("q", hits, texts, mode="external", scorer=broken)

    def test_empty_hits_rejected(self):
        with pytest.raises(ValueError):
            rerank("q", [], {})


class TestHybridRetrieve:
    def test_double_channel_winner_stays_first(self, f1_retriever):
        # the chunk that alone contains the full query dominates both channels
        hits = f1_retriever.retrieve("report_timing", 3)
        assert hits[0].chunk_id == "sta-guide#0"

    def test_matches_composed_oracle(self, f1_chunks, f1_retriever):
        chunk_texts = {c.chunk_id: c.text for c in f1_chunks}
        chunk_lengths = {c.chunk_id: c.length_units for c in f1_chunks}
        chunk_vecs = {c.chunk_id: list(hashed_bag_embedding(c.text)) for c in f1_chunks}
        for query in ["report_timing slack corners", "scan chain insertion", "netlist area timing"]:
            want = composed_hybrid_ranking(
                query, chunk_texts, chunk_lengths, chunk_vecs, list(hashed_bag_embedding(query)), k=3
            )
            got = [h.chunk_id for h in f1_retriever.retrieve(query, 3)]
            assert got == want

    def test_no_match_query_gives_empty(self, f1_chunks, f1_retriever):
        query = collision_free_query(f1_chunks)
        assert f1_retriever.retrieve(query, 3) == []

    def test_deterministic_across_calls(self, f1_retriever):
        first = f1_retriever.retrieve("scan chain insertion coverage", 5)
        second = f1_retriever.retrieve("scan chain insertion coverage", 5)
        assert first == second

    def test_fresh_retriever_gives_identical_results(self, f1_chunks, f1_retriever):
        other = HybridRetriever(f1_chunks, ModelGateway(GatewayConfig(mode="stub:echo")))
        q = "report_timing slack corners"
        assert other.retrieve(q, 3) == f1_retriever.retrieve(q, 3)


class TestIndexPersistence:
    def test_lexical_round_trip(self, f1_chunks, tmp_path):
        index = build_lexical_index(f1_chunks)
        path = tmp_path / "lex.jsonl"
        save_lexical_index(index, path)
        loaded = load_lexical_index(path)
        assert loaded == index

    def test_vector_round_trip(self, f1_chunks, stub_gateway, tmp_path):
        index = build_vector_index(f1_chunks, stub_gateway)
        path = tmp_path / "vec.jsonl"
        save_vector_index(index, path)
        loaded = load_vector_index(path)
        assert loaded.chunk_ids == index.chunk_ids
        assert np.array_equal(loaded.matrix, index.matrix)

    def test_loaded_indexes_search_identically(self, f1_chunks, stub_gateway, tmp_path):
        lex = build_lexical_index(f1_chunks)
        save_lexical_index(lex, tmp_path / "lex.jsonl")
        loaded = load_lexical_index(tmp_path / "lex.jsonl")
        q = "scan chain insertion"
        assert lexical_search(loaded, q, 5) == lexical_search(lex, q, 5)
