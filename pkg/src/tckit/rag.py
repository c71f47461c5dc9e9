"""Retrieval-augmented generation harness and answer scoring.

Three context configurations (text-only, table-only, interleaved) times
two retrievers give six setups per topic. Each generates sampled answers
that are scored with context relevance (needed-sentence ratio),
faithfulness (supported-statement ratio), answer relevance (mean query
to generated-question embedding similarity), and retrieval precision /
recall against binary relevance labels.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GatewayError, ValidationError
from .gateway import ChatRequest, Gateway, user_message
from .prompts import render_template
from .records import Qrel, RagAnswer, RagasScores, Topic
from .textutils import split_sentences, squash_ws, token_count

RAG_RETRIEVERS = ("bm25", "cosine")
RAG_MODES = ("text", "table", "interleave")
CONTEXT_K = 10
SAMPLES_PER_CONFIG = 5
ANSWER_RELEVANCE_N = 5


@dataclass(frozen=True)
class RagConfig:
    retriever: str
    modality_mode: str
    context_k: int = CONTEXT_K
    samples_per_config: int = SAMPLES_PER_CONFIG

    def __post_init__(self):
        if self.retriever not in RAG_RETRIEVERS:
            raise ConfigError(f"unknown retriever {self.retriever!r}")
        if self.modality_mode not in RAG_MODES:
            raise ConfigError(f"unknown modality mode {self.modality_mode!r}")
        if self.context_k < 1:
            raise ConfigError(f"context_k must be >= 1, got {self.context_k}")

    @property
    def tag(self) -> str:
        return f"{self.retriever}_{self.modality_mode}"


def all_rag_configs(context_k: int = CONTEXT_K,
                    samples: int = SAMPLES_PER_CONFIG) -> list[RagConfig]:
    """The 2 x 3 cross product of retrievers and modality modes."""
    return [RagConfig(retriever=r, modality_mode=m, context_k=context_k,
                      samples_per_config=samples)
            for r in RAG_RETRIEVERS for m in RAG_MODES]


@dataclass(frozen=True)
class ContextElement:
    item_id: str
    modality: str
    rendered_text: str


@dataclass(frozen=True)
class ContextBundle:
    topic_id: str
    config_tag: str
    elements: tuple[ContextElement, ...]

    def rendered(self) -> str:
        return "\n\n".join(e.rendered_text for e in self.elements)

    def modalities(self) -> set[str]:
        return {e.modality for e in self.elements}


def assemble_context(topic: Topic, config: RagConfig,
                     rankings: dict[str, list[str]],
                     render: dict[str, object]) -> ContextBundle:
    """Build the retrieval context for one (topic, config).

    ``rankings`` maps modality -> ranked item ids for this config's
    retriever; ``render`` maps modality -> callable(item_id) -> text.
    Text and table modes take the top-k of their modality. Interleave
    takes the top half of each and alternates starting with text; when
    one modality runs short the other's next ranks backfill, with a
    warning.
    """
    k = config.context_k

    def take(modality: str, ids) -> list[ContextElement]:
        render_fn = render[modality]
        return [ContextElement(item_id=i, modality=modality,
                               rendered_text=render_fn(i)) for i in ids]

    if config.modality_mode == "text":
        elements = take("passage", rankings["passage"][:k])
    elif config.modality_mode == "table":
        elements = take("table", rankings["table"][:k])
    else:
        half = k // 2
        texts = rankings["passage"]
        tables = rankings["table"]
        paired = min(half, len(texts), len(tables))
        elements = []
        for i in range(paired):
            elements.append(take("passage", [texts[i]])[0])
            elements.append(take("table", [tables[i]])[0])
        remaining = k - len(elements)
        if remaining > 0:
            if paired < half and len(texts) > paired:
                backfill = texts[paired:paired + remaining]
                elements.extend(take("passage", backfill))
                warnings.warn(f"interleave for topic {topic.topic_id}: "
                              f"backfilled {len(backfill)} passages", stacklevel=2)
            elif paired < half and len(tables) > paired:
                backfill = tables[paired:paired + remaining]
                elements.extend(take("table", backfill))
                warnings.warn(f"interleave for topic {topic.topic_id}: "
                              f"backfilled {len(backfill)} tables", stacklevel=2)
            else:
                # Both modalities full: finish the alternation tail.
                extra_t = texts[paired:paired + (remaining + 1) // 2]
                extra_T = tables[paired:paired + remaining // 2]
                for i in range(max(len(extra_t), len(extra_T))):
                    if i < len(extra_t):
                        elements.append(take("passage", [extra_t[i]])[0])
                    if i < len(extra_T):
                        elements.append(take("table", [extra_T[i]])[0])
    return ContextBundle(topic_id=topic.topic_id, config_tag=config.tag,
                         elements=tuple(elements[:k]))


def generate_answers(topic: Topic, bundle: ContextBundle, gateway: Gateway,
                     model_tag: str, samples: int = SAMPLES_PER_CONFIG,
                     template_dir=None) -> list[RagAnswer]:
    """Sample independent answers over the bundled context.

    Answer generation uses the provider's default temperature (sampling
    is the point); failures on single samples leave a gap rather than
    aborting the batch.
    """
    prompt = render_template("rag_answer", template_dir,
                             question=topic.query_text(),
                             context=bundle.rendered())
    answers = []
    for i in range(1, samples + 1):
        try:
            response = gateway.chat(
                ChatRequest(model_tag=model_tag, messages=user_message(prompt),
                            temperature=None, seed=i),
                purpose="rag_answer")
        except GatewayError as exc:
            warnings.warn(f"answer sample {i} for topic {topic.topic_id} "
                          f"config {bundle.config_tag} failed: {exc}",
                          stacklevel=2)
            continue
        text = response.text.strip() or "(empty answer)"
        answers.append(RagAnswer(
            answer_id=f"{topic.topic_id}/{bundle.config_tag}/{i}",
            topic_id=topic.topic_id, config_tag=bundle.config_tag,
            sample_index=i, text=text, token_count=max(1, token_count(text))))
    return answers


# ----------------------------------------------------------------------
# RAGAS-style metrics

_INSUFFICIENT = "insufficient information"


def context_relevance(topic: Topic, bundle: ContextBundle, gateway: Gateway,
                      model_tag: str, template_dir=None) -> tuple[float, int, int]:
    """Needed-sentence ratio of the context.

    The judge extracts sentences it deems necessary; only lines that are
    verbatim sentences of the context (whitespace-normalized) count.
    Returns (score, extracted count, total sentence count).
    """
    context = bundle.rendered()
    sentences = split_sentences(context)
    total = len(sentences)
    if total == 0:
        return 0.0, 0, 0
    prompt = render_template("ragas_extract", template_dir,
                             question=topic.query_text(), context=context)
    response = gateway.chat(
        ChatRequest(model_tag=model_tag, messages=user_message(prompt)),
        purpose="ragas")
    if _INSUFFICIENT in response.text.strip().lower():
        return 0.0, 0, total
    normalized = {squash_ws(s): i for i, s in enumerate(sentences)}
    matched: set[int] = set()
    for line in response.text.splitlines():
        idx = normalized.get(squash_ws(line))
        if idx is not None:
            matched.add(idx)
    return len(matched) / total, len(matched), total


def faithfulness(topic: Topic, answer: RagAnswer, bundle: ContextBundle,
                 gateway: Gateway, model_tag: str,
                 template_dir=None) -> tuple[float, int, int, bool]:
    """Supported-statement ratio of the answer against the context.

    Returns (score, supported count, statement count, degenerate flag);
    a degenerate answer yields zero statements and scores 0 with the
    flag set.
    """
    extract_prompt = render_template("ragas_statements", template_dir,
                                     question=topic.query_text(),
                                     answer=answer.text)
    statements = [line.strip() for line in gateway.chat(
        ChatRequest(model_tag=model_tag, messages=user_message(extract_prompt)),
        purpose="ragas").text.splitlines() if line.strip()]
    if not statements:
        return 0.0, 0, 0, True
    numbered = "\n".join(f"{i}. {s}" for i, s in enumerate(statements, start=1))
    verify_prompt = render_template("ragas_verify", template_dir,
                                    context=bundle.rendered(),
                                    statements=numbered)
    verdict_text = gateway.chat(
        ChatRequest(model_tag=model_tag, messages=user_message(verify_prompt)),
        purpose="ragas").text
    verdicts = re.findall(r"\b(yes|no)\b", verdict_text, re.IGNORECASE)
    supported = sum(1 for v in verdicts[:len(statements)] if v.lower() == "yes")
    return supported / len(statements), supported, len(statements), False


def answer_relevance(topic: Topic, answer: RagAnswer, gateway: Gateway,
                     model_tag: str, embed_model: str,
                     n: int = ANSWER_RELEVANCE_N,
                     template_dir=None) -> tuple[float, list[float]]:
    """Mean cosine similarity between the query and questions the answer implies.

    Cosine values below zero clamp to 0 so the score stays within [0, 1].
    Fewer than n parsed questions average over what parsed; zero is an error.
    """
    prompt = render_template("ragas_questions", template_dir, n=n,
                             answer=answer.text)
    response = gateway.chat(
        ChatRequest(model_tag=model_tag, messages=user_message(prompt)),
        purpose="ragas")
    questions = [line.strip() for line in response.text.splitlines()
                 if line.strip()][:n]
    if not questions:
        raise GatewayError(
            f"question model {model_tag!r} returned no parseable questions "
            f"for answer {answer.answer_id!r}")
    vectors = gateway.embed(embed_model, [topic.query_text(), *questions])
    query_vec = _unit(vectors[0])
    sims = [max(0.0, min(1.0, float(np.dot(query_vec, _unit(v)))))
            for v in vectors[1:]]
    return sum(sims) / len(sims), sims


def _unit(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


def precision_recall(bundle: ContextBundle,
                     binary_qrels) -> tuple[float, float | None]:
    """Retrieval precision and recall of the bundle under binary labels.

    ``binary_qrels`` are Qrel records with levels in {0, 1} for the
    bundle's topic. Unjudged items count as non-relevant. Recall's
    denominator is the relevant total within the bundle's modalities;
    with no relevant items recall is undefined (None).
    """
    modalities = bundle.modalities()
    relevant_ids = {q.item_id for q in binary_qrels
                    if q.level >= 1 and q.modality in modalities}
    retrieved = [e.item_id for e in bundle.elements]
    if not retrieved:
        return 0.0, None if not relevant_ids else 0.0
    hits = sum(1 for item_id in retrieved if item_id in relevant_ids)
    precision = hits / len(retrieved)
    recall = hits / len(relevant_ids) if relevant_ids else None
    return precision, recall


def score_answer(topic: Topic, answer: RagAnswer, bundle: ContextBundle,
                 gateway: Gateway, ragas_model: str, embed_model: str,
                 binary_qrels, n_questions: int = ANSWER_RELEVANCE_N,
                 template_dir=None) -> RagasScores:
    """All metrics for one answer, with the intermediates retained."""
    cr, extracted, total_sentences = context_relevance(
        topic, bundle, gateway, ragas_model, template_dir=template_dir)
    f_score, supported, total_statements, degenerate = faithfulness(
        topic, answer, bundle, gateway, ragas_model, template_dir=template_dir)
    ar, sims = answer_relevance(topic, answer, gateway, ragas_model,
                                embed_model, n=n_questions,
                                template_dir=template_dir)
    precision, recall = precision_recall(bundle, binary_qrels)
    scores = RagasScores(
        answer_id=answer.answer_id, context_relevance=cr,
        faithfulness=f_score, answer_relevance=ar,
        precision_at_k=precision, recall=recall,
        extracted_sentences=extracted, total_sentences=total_sentences,
        supported_statements=supported, total_statements=total_statements,
        question_sims=tuple(sims), degenerate_answer=degenerate)
    scores.validate()
    return scores


def binary_qrels_from_judgments(judgments, judge: str = "majority") -> list[Qrel]:
    """Binary Qrels derived from one judge's 4-level labels (0,1 -> 0; 2,3 -> 1)."""
    from .assessment import to_binary

    out = []
    for j in judgments:
        if j.judge != judge or j.level is None:
            continue
        out.append(Qrel(topic_id=j.topic_id, item_id=j.item_id,
                        modality=j.modality, level=to_binary(j.level),
                        source="synthetic"))
    return out
