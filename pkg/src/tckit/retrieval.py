"""Sparse and dense retrieval, query variants, rank fusion, and pooling.

Two retrieval models over any (item_id, text) corpus: an inverted-index
BM25 and exhaustive cosine search over embeddings. Per topic and
modality, the original query plus its generated variants run through
both models and the rankings are fused with reciprocal rank fusion into
a fixed-depth assessment pool.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GatewayError
from .gateway import ChatRequest, Gateway, user_message
from .prompts import render_template
from .records import QueryVariantSet, RunEntry, Topic
from .textutils import tokenize

BM25_K1 = 0.9
BM25_B = 0.4
RRF_K = 60
POOL_DEPTH = 200
N_VARIANTS = 5


@dataclass(frozen=True)
class PooledRanking:
    topic_id: str
    modality: str
    entries: tuple[tuple[str, float], ...]  # (item_id, fused_score), best first
    depth: int

    def item_ids(self) -> list[str]:
        return [item_id for item_id, _ in self.entries]


class Bm25Index:
    """Inverted-index BM25 with ln(1 + (N - df + 0.5)/(df + 0.5)) idf.

    Tokenization is lowercase split on non-alphanumerics, no stemming, no
    stopwords. Ties in score are broken by item_id ascending.
    """

    model = "bm25"

    def __init__(self, index_id: str, modality: str, item_ids: list[str],
                 term_freqs: list[dict[str, int]], k1: float = BM25_K1,
                 b: float = BM25_B):
        self.index_id = index_id
        self.modality = modality
        self.item_ids = list(item_ids)
        self.term_freqs = [dict(tf) for tf in term_freqs]
        self.doc_lens = [sum(tf.values()) for tf in self.term_freqs]
        self.k1 = k1
        self.b = b
        self.df = Counter()
        for tf in self.term_freqs:
            self.df.update(tf.keys())
        self.n_items = len(self.item_ids)
        total = sum(self.doc_lens)
        self.avgdl = total / self.n_items if total else 1.0

    @property
    def item_count(self) -> int:
        return self.n_items

    @property
    def build_params(self) -> dict:
        return {"k1": self.k1, "b": self.b}

    @classmethod
    def build(cls, modality: str, corpus, k1: float = BM25_K1,
              b: float = BM25_B, index_id: str | None = None) -> "Bm25Index":
        corpus = list(corpus)
        if not corpus:
            raise ConfigError("cannot build a BM25 index over an empty corpus")
        item_ids = [item_id for item_id, _ in corpus]
        term_freqs = [dict(Counter(tokenize(text))) for _, text in corpus]
        return cls(index_id or f"bm25-{modality}", modality, item_ids,
                   term_freqs, k1=k1, b=b)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n_items - df + 0.5) / (df + 0.5))

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        if k <= 0:
            raise ConfigError(f"k must be positive, got {k}")
        q_tokens = tokenize(query)
        scored: dict[str, float] = {}
        for idx, item_id in enumerate(self.item_ids):
            tf_map = self.term_freqs[idx]
            norm = self.k1 * (1.0 - self.b + self.b * self.doc_lens[idx] / self.avgdl)
            score = 0.0
            for term in q_tokens:
                tf = tf_map.get(term)
                if not tf:
                    continue
                score += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
            if score > 0.0:
                scored[item_id] = score
        ranked = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]

    def to_dict(self) -> dict:
        return {"index_id": self.index_id, "modality": self.modality,
                "model": self.model, "item_ids": self.item_ids,
                "term_freqs": self.term_freqs,
                "build_params": self.build_params}

    @classmethod
    def from_dict(cls, data: dict) -> "Bm25Index":
        return cls(data["index_id"], data["modality"], data["item_ids"],
                   data["term_freqs"], k1=data["build_params"]["k1"],
                   b=data["build_params"]["b"])


class DenseIndex:
    """Exhaustive exact cosine search over unit-normalized embeddings."""

    model = "dense_cosine"

    def __init__(self, index_id: str, modality: str, item_ids: list[str],
                 matrix: np.ndarray, embed_model: str, gateway: Gateway | None):
        self.index_id = index_id
        self.modality = modality
        self.item_ids = list(item_ids)
        self.matrix = _unit_rows(np.asarray(matrix, dtype=float))
        self.embed_model = embed_model
        self.gateway = gateway

    @property
    def item_count(self) -> int:
        return len(self.item_ids)

    @property
    def build_params(self) -> dict:
        return {"embed_model": self.embed_model}

    @classmethod
    def build(cls, modality: str, corpus, gateway: Gateway, embed_model: str,
              index_id: str | None = None) -> "DenseIndex":
        corpus = list(corpus)
        if not corpus:
            raise ConfigError("cannot build a dense index over an empty corpus")
        item_ids = [item_id for item_id, _ in corpus]
        texts = [text for _, text in corpus]
        try:
            vectors = gateway.embed(embed_model, texts)
        except GatewayError:
            # Batch failed after retries; isolate the offending item.
            vectors = []
            for item_id, text in corpus:
                try:
                    vectors.extend(gateway.embed(embed_model, [text]))
                except GatewayError as exc:
                    raise GatewayError(
                        f"embedding failed for item {item_id!r}: {exc}") from exc
        return cls(index_id or f"dense-{modality}", modality, item_ids,
                   np.vstack(vectors), embed_model, gateway)

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        if k <= 0:
            raise ConfigError(f"k must be positive, got {k}")
        if self.gateway is None:
            raise ConfigError("dense index has no gateway attached")
        qvec = self.gateway.embed(self.embed_model, [query])[0]
        qvec = np.asarray(qvec, dtype=float)
        norm = np.linalg.norm(qvec)
        if norm > 0.0:
            qvec = qvec / norm
        sims = self.matrix @ qvec
        order = sorted(range(len(self.item_ids)),
                       key=lambda i: (-sims[i], self.item_ids[i]))
        return [(self.item_ids[i], float(sims[i])) for i in order[:k]]

    def to_dict(self) -> dict:
        return {"index_id": self.index_id, "modality": self.modality,
                "model": self.model, "item_ids": self.item_ids,
                "vectors": [[float(x) for x in row] for row in self.matrix],
                "build_params": self.build_params}

    @classmethod
    def from_dict(cls, data: dict, gateway: Gateway | None = None) -> "DenseIndex":
        return cls(data["index_id"], data["modality"], data["item_ids"],
                   np.asarray(data["vectors"], dtype=float),
                   data["build_params"]["embed_model"], gateway)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


# ----------------------------------------------------------------------
# module-level operation surface

def build_bm25_index(modality: str, corpus, k1: float = BM25_K1,
                     b: float = BM25_B) -> Bm25Index:
    return Bm25Index.build(modality, corpus, k1=k1, b=b)


def bm25_search(index: Bm25Index, query: str, k: int) -> list[tuple[str, float]]:
    return index.search(query, k)


def build_dense_index(modality: str, corpus, gateway: Gateway,
                      embed_model: str) -> DenseIndex:
    return DenseIndex.build(modality, corpus, gateway, embed_model)


def dense_search(index: DenseIndex, query: str, k: int) -> list[tuple[str, float]]:
    return index.search(query, k)


_NUMBERING = ("-", "*", "•")


def _parse_variant_lines(text: str) -> list[str]:
    variants = []
    for line in text.splitlines():
        line = line.strip()
        for bullet in _NUMBERING:
            if line.startswith(bullet):
                line = line[len(bullet):].strip()
        # strip "1." / "1)" style enumeration
        head = line.split(" ", 1)
        if len(head) == 2 and head[0].rstrip(".)").isdigit():
            line = head[1].strip()
        if line and line not in variants:
            variants.append(line)
    return variants


def generate_query_variants(topic: Topic, gateway: Gateway, model_tag: str,
                            n: int = N_VARIANTS,
                            template_dir=None) -> QueryVariantSet:
    """Ask the variant model for n rephrasings of title + description.

    Providers returning extra lines are truncated to n; short or
    duplicate-heavy responses get one retry, after which whatever parsed
    is accepted (at least one variant is required).
    """
    query = topic.query_text()
    prompt = render_template("variants", template_dir, n=n, question=query)
    request = ChatRequest(model_tag=model_tag, messages=user_message(prompt))
    variants = _parse_variant_lines(
        gateway.chat(request, purpose="variant_gen").text)
    if len(variants) < n:
        retry = ChatRequest(model_tag=model_tag, messages=user_message(
            prompt + "\nRemember: one rewrite per line, nothing else."))
        retried = _parse_variant_lines(
            gateway.chat(retry, purpose="variant_gen").text)
        if len(retried) > len(variants):
            variants = retried
    if not variants:
        raise GatewayError(
            f"variant model {model_tag!r} returned no parseable rewrites "
            f"for topic {topic.topic_id!r}")
    return QueryVariantSet(topic_id=topic.topic_id, original_query=query,
                           variants=tuple(variants[:n]))


def rrf_fuse(rankings, k_rrf: int = RRF_K, depth: int = POOL_DEPTH,
             topic_id: str = "", modality: str = "passage") -> PooledRanking:
    """Reciprocal rank fusion: score(item) = sum over rankings of 1/(k + rank).

    Ranks are 1-based positions. Ties in fused score break by item_id
    ascending; the top ``depth`` items are kept.
    """
    rankings = [list(r) for r in rankings]
    if not rankings:
        raise ConfigError("rrf_fuse needs at least one ranking")
    scores: dict[str, float] = {}
    for ranking in rankings:
        for pos, item in enumerate(ranking, start=1):
            item_id = item[0] if isinstance(item, tuple) else item
            scores[item_id] = scores.get(item_id, 0.0) + 1.0 / (k_rrf + pos)
    fused = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:depth]
    return PooledRanking(topic_id=topic_id, modality=modality,
                         entries=tuple(fused), depth=depth)


def build_pool(topic: Topic, modality: str, bm25_index: Bm25Index,
               dense_index: DenseIndex, variants: QueryVariantSet,
               depth: int = POOL_DEPTH, k_rrf: int = RRF_K) -> PooledRanking:
    """Fuse both retrievers over the original query and all its variants.

    With the default five variants this is 2 x (1 + 5) = 12 rankings.
    """
    queries = [variants.original_query, *variants.variants]
    rankings = []
    try:
        for index in (bm25_index, dense_index):
            for query in queries:
                rankings.append(
                    [item_id for item_id, _ in index.search(query, depth)])
    except GatewayError as exc:
        raise GatewayError(f"topic {topic.topic_id}: {exc}") from exc
    return rrf_fuse(rankings, k_rrf=k_rrf, depth=depth,
                    topic_id=topic.topic_id, modality=modality)


def pool_run_entries(pool: PooledRanking, run_tag: str | None = None) -> list[RunEntry]:
    """Materialize a pooled ranking as TREC run entries (tag pool-<modality>)."""
    tag = run_tag or f"pool-{pool.modality}"
    return [RunEntry(topic_id=pool.topic_id, item_id=item_id,
                     modality=pool.modality, rank=rank, score=score,
                     run_tag=tag)
            for rank, (item_id, score) in enumerate(pool.entries, start=1)]
