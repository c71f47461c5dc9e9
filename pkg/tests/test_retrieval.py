import math
import random
import re

import numpy as np
import pytest

from tckit.errors import ConfigError, GatewayError
from tckit.gateway import Gateway, MockProvider, ScriptedProvider
from tckit.records import Topic
from tckit.retrieval import (Bm25Index, DenseIndex, build_pool, bm25_search,
                             build_bm25_index, generate_query_variants,
                             pool_run_entries, rrf_fuse)
from tckit.textutils import tokenize

# ----------------------------------------------------------------------
# independent oracles


def oracle_tokenize(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def oracle_bm25_scores(corpus, query, k1=0.9, b=0.4):
    """Direct formula evaluation, independent of the index structures."""
    docs = {item_id: oracle_tokenize(text) for item_id, text in corpus}
    n_docs = len(docs)
    lens = {i: len(toks) for i, toks in docs.items()}
    avgdl = sum(lens.values()) / n_docs if sum(lens.values()) else 1.0
    scores = {}
    for item_id, toks in docs.items():
        score = 0.0
        for term in oracle_tokenize(query):
            tf = toks.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in docs.values() if term in other)
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * lens[item_id] / avgdl))
        if score > 0:
            scores[item_id] = score
    return scores


def oracle_rrf(rankings, k_rrf=60):
    """Explicit double loop over rankings and positions."""
    scores = {}
    for ranking in rankings:
        for pos, item in enumerate(ranking):
            scores[item] = scores.get(item, 0.0) + 1.0 / (k_rrf + pos + 1)
    return scores


# ----------------------------------------------------------------------
# BM25


def test_tokenizer_definition():
    assert tokenize("COVID-19 spread") == ["covid", "19", "spread"]


def test_document_frequency_counting():
    index = build_bm25_index("passage", [("d1", "alpha beta"),
                                         ("d2", "gamma beta")])
    assert index.df["alpha"] == 1
    assert index.df["beta"] == 2
    assert index.item_count == 2


def test_ln2_case():
    # N=2, df=1, tf=1, dl=avgdl: idf = ln 2 and the tf part is exactly 1
    index = build_bm25_index("passage", [("d1", "alpha beta"),
                                         ("d2", "gamma delta")])
    results = bm25_search(index, "alpha", k=10)
    assert results == [("d1", pytest.approx(math.log(2), abs=1e-12))]


def test_no_matching_terms_empty_ranking():
    index = build_bm25_index("passage", [("d1", "alpha"), ("d2", "beta")])
    assert bm25_search(index, "zeta", k=5) == []


def test_tie_broken_by_item_id():
    index = build_bm25_index("passage", [("b", "alpha x"), ("a", "alpha y")])
    results = bm25_search(index, "alpha", k=5)
    assert [item for item, _ in results] == ["a", "b"]
    assert results[0][1] == pytest.approx(results[1][1])


def test_k_must_be_positive():
    index = build_bm25_index("passage", [("d1", "alpha")])
    with pytest.raises(ConfigError):
        bm25_search(index, "alpha", k=0)


def test_empty_corpus_rejected():
    with pytest.raises(ConfigError):
        build_bm25_index("passage", [])


def test_rebuild_identical_statistics():
    corpus = [("d1", "alpha beta beta"), ("d2", "beta gamma")]
    a = build_bm25_index("passage", corpus)
    b = build_bm25_index("passage", corpus)
    assert a.to_dict() == b.to_dict()


def test_bm25_matches_oracle_on_random_corpora():
    rng = random.Random(42)
    vocab = ["virus", "mask", "vaccine", "trial", "dose", "sleep", "memory",
             "cohort", "serum", "rate"]
    for _ in range(30):
        n_docs = rng.randint(1, 20)
        corpus = [(f"d{i:02d}", " ".join(rng.choices(vocab, k=rng.randint(1, 12))))
                  for i in range(n_docs)]
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 4)))
        index = build_bm25_index("passage", corpus)
        expected = oracle_bm25_scores(corpus, query)
        got = dict(bm25_search(index, query, k=n_docs))
        assert set(got) == set(expected)
        for item_id, score in expected.items():
            assert got[item_id] == pytest.approx(score, abs=1e-9)


def test_bm25_round_trips_through_dict():
    corpus = [("d1", "alpha beta beta"), ("d2", "beta gamma")]
    index = build_bm25_index("passage", corpus)
    clone = Bm25Index.from_dict(index.to_dict())
    assert bm25_search(clone, "beta gamma", 5) == bm25_search(index, "beta gamma", 5)


# ----------------------------------------------------------------------
# dense


class TableEmbedProvider:
    """Embeds via a fixed text -> vector table (for exact cosine cases)."""

    def __init__(self, table):
        self.table = table

    def embed(self, model_tag, texts):
        return [np.asarray(self.table[t], dtype=float) for t in texts]


def dense_index_for(table, corpus_ids):
    gateway = Gateway(default_provider=TableEmbedProvider(table))
    return DenseIndex.build("passage", [(i, i) for i in corpus_ids], gateway,
                            "embed-x")


def test_cosine_exact_cases():
    table = {"q_same": [1.0, 0.0], "q_diag": [1.0, 1.0],
             "ex": [1.0, 0.0], "ey": [0.0, 1.0]}
    index = dense_index_for(table, ["ex", "ey"])
    results = dict(index.search("q_same", 2))
    assert results["ex"] == pytest.approx(1.0, abs=1e-12)
    assert results["ey"] == pytest.approx(0.0, abs=1e-12)
    results = dict(index.search("q_diag", 2))
    assert results["ex"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_dense_ranking_scale_invariant():
    rng = random.Random(9)
    ids = [f"v{i}" for i in range(12)]
    table = {i: [rng.gauss(0, 1) for _ in range(6)] for i in ids}
    table["query"] = [rng.gauss(0, 1) for _ in range(6)]
    index = dense_index_for(table, ids)
    baseline = [item for item, _ in index.search("query", 12)]

    scaled = DenseIndex.from_dict(
        {**index.to_dict(),
         "vectors": [[x * 37.5 for x in row] for row in index.to_dict()["vectors"]]},
        Gateway(default_provider=TableEmbedProvider(table)))
    assert [item for item, _ in scaled.search("query", 12)] == baseline


def test_dense_embedding_failure_names_item():
    class FailingProvider:
        def embed(self, model_tag, texts):
            if any("bad" in t for t in texts):
                from tckit.gateway import TransportError
                raise TransportError("boom")
            return [np.ones(4) for _ in texts]

    gateway = Gateway(default_provider=FailingProvider(), sleep=lambda _: None)
    with pytest.raises(GatewayError, match="item-bad"):
        DenseIndex.build("passage", [("item-ok", "fine"), ("item-bad", "bad text")],
                         gateway, "embed-x")


# ----------------------------------------------------------------------
# RRF


def test_rrf_frozen_cases():
    fused = rrf_fuse([["A"], ["A"]], k_rrf=60)
    assert dict(fused.entries)["A"] == pytest.approx(2 / 61, abs=1e-12)

    fused = rrf_fuse([["A", "B"], ["B", "A"]], k_rrf=60)
    scores = dict(fused.entries)
    assert scores["A"] == pytest.approx(1 / 61 + 1 / 62, abs=1e-12)
    assert scores["A"] == pytest.approx(scores["B"], abs=1e-12)
    assert [i for i, _ in fused.entries] == ["A", "B"]  # id tie-break


def test_rrf_single_ranking_preserves_order():
    fused = rrf_fuse([["x", "y", "z"]])
    assert [i for i, _ in fused.entries] == ["x", "y", "z"]


def test_rrf_depth_truncation():
    fused = rrf_fuse([[f"i{j:03d}" for j in range(300)]], depth=200)
    assert len(fused.entries) == 200


def test_rrf_requires_a_ranking():
    with pytest.raises(ConfigError):
        rrf_fuse([])


def test_rrf_matches_oracle_on_random_instances():
    rng = random.Random(11)
    for _ in range(100):
        n_rankings = rng.randint(1, 10)
        items = [f"it{j:02d}" for j in range(rng.randint(1, 50))]
        rankings = []
        for _ in range(n_rankings):
            pool = items[:]
            rng.shuffle(pool)
            rankings.append(pool[: rng.randint(1, len(pool))])
        fused = rrf_fuse(rankings, k_rrf=60, depth=1000)
        expected = oracle_rrf(rankings, k_rrf=60)
        assert dict(fused.entries) == pytest.approx(expected, abs=1e-12)
        expected_order = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))
        assert [i for i, _ in fused.entries] == [i for i, _ in expected_order]


# ----------------------------------------------------------------------
# query variants and pooling


def topic():
    return Topic(topic_id="t1", title="hand hygiene",
                 description="effect on infection rates")


def test_variants_from_mock():
    gateway = Gateway(default_provider=MockProvider(seed=5))
    variants = generate_query_variants(topic(), gateway, "vargen-mock", n=5)
    assert len(variants.variants) == 5
    assert variants.original_query == "hand hygiene effect on infection rates"


def test_variants_truncated_to_n():
    provider = ScriptedProvider(["\n".join(f"variant {i}" for i in range(7))])
    gateway = Gateway(default_provider=provider)
    variants = generate_query_variants(topic(), gateway, "m", n=5)
    assert len(variants.variants) == 5
    assert variants.variants[0] == "variant 0"


def test_variants_deduplicated_after_retry():
    response = "same line\nsame line\nsame line"
    provider = ScriptedProvider([response, response])
    gateway = Gateway(default_provider=provider)
    variants = generate_query_variants(topic(), gateway, "m", n=5)
    assert variants.variants == ("same line",)


def test_variants_numbering_stripped():
    provider = ScriptedProvider(["1. first try\n2) second try\n- third try"])
    gateway = Gateway(default_provider=provider)
    variants = generate_query_variants(topic(), gateway, "m", n=3)
    assert variants.variants == ("first try", "second try", "third try")


def test_variants_zero_parseable_is_error():
    provider = ScriptedProvider(["", ""])
    gateway = Gateway(default_provider=provider)
    with pytest.raises(GatewayError):
        generate_query_variants(topic(), gateway, "m", n=5)


class CountingIndex:
    """Stub index that records each search call."""

    def __init__(self, items):
        self.items = items
        self.calls = []

    def search(self, query, k):
        self.calls.append((query, k))
        return [(i, 1.0 / (r + 1)) for r, i in enumerate(self.items[:k])]


def test_build_pool_runs_twelve_rankings():
    from tckit.records import QueryVariantSet

    bm25 = CountingIndex([f"p{i}" for i in range(30)])
    dense = CountingIndex([f"p{i}" for i in range(30)])
    variants = QueryVariantSet(topic_id="t1", original_query="orig q",
                               variants=tuple(f"v{i}" for i in range(5)))
    pool = build_pool(topic(), "passage", bm25, dense, variants, depth=200)
    assert len(bm25.calls) + len(dense.calls) == 12
    assert {q for q, _ in bm25.calls} == {"orig q", "v0", "v1", "v2", "v3", "v4"}
    assert len(pool.entries) == 30  # bounded by corpus, not depth
    assert pool.depth == 200


def test_pool_run_entries_are_coherent():
    from tckit.records import QueryVariantSet

    bm25 = CountingIndex([f"p{i}" for i in range(10)])
    dense = CountingIndex([f"p{i}" for i in range(10)])
    variants = QueryVariantSet(topic_id="t1", original_query="q",
                               variants=("a", "b", "c", "d", "e"))
    pool = build_pool(topic(), "passage", bm25, dense, variants, depth=5)
    entries = pool_run_entries(pool)
    assert [e.rank for e in entries] == [1, 2, 3, 4, 5]
    assert entries[0].run_tag == "pool-passage"
    scores = [e.score for e in entries]
    assert scores == sorted(scores, reverse=True)
