"""Stage functions behind the CLI: acquire through report.

Each stage reads and writes only store files, so any stage's output can
be inspected or replaced by hand, and every stage skips work whose
outputs already exist unless forced. A missing upstream artifact raises
:class:`StageError` naming the stage that should have produced it.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict
from pathlib import Path

from . import rag
from .agreement import judgments_by_rater, mean_pairwise_kappa
from .assessment import run_assessment
from .config import PipelineConfig
from .elo import EloConfig, judge_pair, run_tournament, schedule_pairs
from .errors import TckitError
from .extraction import (filter_misclassified, ingest_and_enrich,
                         load_parsed_document, summarize_audit)
from .gateway import CostLedgerEntry, Gateway, aggregate_cost_report
from .records import from_dict
from .retrieval import (Bm25Index, DenseIndex, build_pool,
                        generate_query_variants, pool_run_entries)
from .store import Store


class StageError(TckitError):
    """A required upstream artifact is missing."""

    def __init__(self, missing_stage: str, message: str):
        self.missing_stage = missing_stage
        super().__init__(message)


def open_store(config: PipelineConfig) -> Store:
    return Store(config.store)


# ----------------------------------------------------------------------
# ingest / chunk

def stage_ingest(store: Store, parsed_dir: str | Path,
                 topics_path: str | Path | None = None,
                 qrels_path: str | Path | None = None,
                 qrels_modality: str = "document") -> dict:
    parsed_dir = Path(parsed_dir)
    paths = sorted(parsed_dir.glob("*.json"))
    docs = tables = figures = 0
    for path in paths:
        result = ingest_and_enrich(store, load_parsed_document(path))
        docs += 1
        tables += len(result.tables)
        figures += len(result.figures)
    topics = 0
    if topics_path is not None:
        from .records import Topic

        records = []
        with open(topics_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(from_dict(Topic, json.loads(line)))
        topics = store.upsert(records)
    qrels = 0
    if qrels_path is not None:
        qrels = store.import_trec_qrels(qrels_path, qrels_modality)
        store.export_trec_qrels(store.root / "qrels.txt")
    return {"documents": docs, "tables": tables, "figures": figures,
            "topics": topics, "qrels": qrels}


def stage_chunk(store: Store, size: int, overlap: int,
                force: bool = False) -> int:
    from .chunking import chunk_text

    documents = store.documents()
    if not documents:
        raise StageError("ingest", "no documents in store; run ingest first")
    have = {p.doc_id for p in store.passages()}
    written = 0
    for doc in documents:
        if not doc.full_text:
            continue
        if doc.doc_id in have and not force:
            continue
        written += store.upsert(chunk_text(doc.doc_id, doc.full_text,
                                           size=size, overlap=overlap))
    return written


# ----------------------------------------------------------------------
# indexes

def _index_dir(store: Store) -> Path:
    return store.root / "indexes"


def _index_path(store: Store, modality: str, model: str) -> Path:
    return _index_dir(store) / f"{modality}-{model}.json"


def _corpus(store: Store, modality: str) -> list[tuple[str, str]]:
    if modality == "passage":
        return [(p.passage_id, p.text) for p in store.passages()]
    if modality == "table":
        return [(t.table_id, t.index_text()) for t in store.tables()
                if filter_misclassified(t) == "keep"]
    raise TckitError(f"no corpus for modality {modality!r}")


def stage_index(store: Store, config: PipelineConfig, gateway: Gateway,
                force: bool = False) -> dict:
    counts = {}
    _index_dir(store).mkdir(exist_ok=True)
    for modality in config.modalities:
        corpus = _corpus(store, modality)
        if not corpus:
            upstream = "chunk" if modality == "passage" else "ingest"
            raise StageError(upstream,
                             f"no {modality} corpus; run {upstream} first")
        bm25_path = _index_path(store, modality, "bm25")
        if force or not bm25_path.exists():
            index = Bm25Index.build(modality, corpus, k1=config.pool.bm25_k1,
                                    b=config.pool.bm25_b)
            bm25_path.write_text(json.dumps(index.to_dict(), sort_keys=True),
                                 encoding="utf-8")
        dense_path = _index_path(store, modality, "dense")
        if force or not dense_path.exists():
            index = DenseIndex.build(modality, corpus, gateway,
                                     config.models.embed_model)
            dense_path.write_text(json.dumps(index.to_dict(), sort_keys=True),
                                  encoding="utf-8")
        counts[modality] = len(corpus)
    return counts


def load_indexes(store: Store, config: PipelineConfig,
                 gateway: Gateway) -> dict[tuple[str, str], object]:
    indexes: dict[tuple[str, str], object] = {}
    for modality in config.modalities:
        for model in ("bm25", "dense"):
            path = _index_path(store, modality, model)
            if not path.exists():
                raise StageError("index",
                                 f"index missing: {path.name}; run index first")
            data = json.loads(path.read_text(encoding="utf-8"))
            if model == "bm25":
                indexes[(modality, model)] = Bm25Index.from_dict(data)
            else:
                indexes[(modality, model)] = DenseIndex.from_dict(data, gateway)
    return indexes


# ----------------------------------------------------------------------
# pooling

def stage_pool(store: Store, config: PipelineConfig, gateway: Gateway,
               force: bool = False) -> dict:
    indexes = load_indexes(store, config, gateway)
    topics = store.topics()
    if not topics:
        raise StageError("ingest", "no topics in store; run ingest first")
    counts = {}
    for modality in config.modalities:
        tag = f"pool-{modality}"
        if store.run_entries(tag) and not force:
            counts[modality] = len(store.run_entries(tag))
            continue
        entries = []
        for topic in topics:
            variants = store.get_variants(topic.topic_id)
            if variants is None or force:
                variants = generate_query_variants(
                    topic, gateway, config.models.variant_model,
                    n=config.pool.variants, template_dir=config.prompt_dir)
                store.upsert([variants])
            pool = build_pool(topic, modality,
                              indexes[(modality, "bm25")],
                              indexes[(modality, "dense")],
                              variants, depth=config.pool.depth,
                              k_rrf=config.pool.k_rrf)
            entries.extend(pool_run_entries(pool))
        store.upsert(entries)
        runs_dir = store.root / "runs"
        runs_dir.mkdir(exist_ok=True)
        store.export_run(tag, runs_dir / f"{tag}.txt")
        counts[modality] = len(entries)
    return counts


# ----------------------------------------------------------------------
# assessment

def stage_assess(store: Store, config: PipelineConfig, gateway: Gateway,
                 models=None, modalities=None, force: bool = False) -> int:
    models = list(models or config.models.assess_models)
    total = 0
    for modality in (modalities or config.modalities):
        if not store.run_entries(f"pool-{modality}"):
            raise StageError("pool",
                             f"pool run for {modality!r} missing; run pool first")
        total += run_assessment(store, gateway, models, modality,
                                template_dir=config.prompt_dir, force=force)
    return total


# ----------------------------------------------------------------------
# RAG

def _rag_rankings(topic, retriever: str, indexes, k: int) -> dict[str, list[str]]:
    model = "bm25" if retriever == "bm25" else "dense"
    rankings = {}
    for modality in ("passage", "table"):
        index = indexes.get((modality, model))
        rankings[modality] = ([item for item, _ in index.search(topic.query_text(), k)]
                              if index is not None else [])
    return rankings


def _render_map(store: Store) -> dict:
    return {
        "passage": lambda item_id: store.get_passage(item_id).text,
        "table": lambda item_id: store.get_table(item_id).render(),
    }


def _bundle_for(store: Store, topic, rag_config, indexes) -> rag.ContextBundle:
    rankings = _rag_rankings(topic, rag_config.retriever, indexes,
                             rag_config.context_k)
    return rag.assemble_context(topic, rag_config, rankings, _render_map(store))


def stage_rag_run(store: Store, config: PipelineConfig, gateway: Gateway,
                  force: bool = False) -> int:
    indexes = load_indexes(store, config, gateway)
    topics = store.topics()
    if not topics:
        raise StageError("ingest", "no topics in store; run ingest first")
    existing = {(a.topic_id, a.config_tag) for a in store.answers()}
    written = 0
    for topic in topics:
        for rag_config in rag.all_rag_configs(config.rag.context_k,
                                              config.rag.samples):
            if (topic.topic_id, rag_config.tag) in existing and not force:
                continue
            bundle = _bundle_for(store, topic, rag_config, indexes)
            answers = rag.generate_answers(
                topic, bundle, gateway, config.models.answer_model,
                samples=config.rag.samples, template_dir=config.prompt_dir)
            written += store.upsert(answers)
    return written


def stage_rag_score(store: Store, config: PipelineConfig, gateway: Gateway,
                    force: bool = False) -> int:
    answers = store.answers()
    if not answers:
        raise StageError("rag run", "no answers in store; run rag run first")
    judgments = store.judgments(judge="majority")
    if not judgments:
        raise StageError("assess",
                         "no majority judgments; run assess before rag score")
    indexes = load_indexes(store, config, gateway)
    scored = {s.answer_id for s in store.ragas_scores()}
    binary_by_topic: dict[str, list] = {}
    for qrel in rag.binary_qrels_from_judgments(judgments):
        binary_by_topic.setdefault(qrel.topic_id, []).append(qrel)

    configs = {c.tag: c for c in rag.all_rag_configs(config.rag.context_k,
                                                     config.rag.samples)}
    topics = {t.topic_id: t for t in store.topics()}
    bundles: dict[tuple[str, str], rag.ContextBundle] = {}
    written = 0
    for answer in answers:
        if answer.answer_id in scored and not force:
            continue
        topic = topics[answer.topic_id]
        key = (answer.topic_id, answer.config_tag)
        if key not in bundles:
            bundles[key] = _bundle_for(store, topic,
                                       configs[answer.config_tag], indexes)
        scores = rag.score_answer(
            topic, answer, bundles[key], gateway, config.models.ragas_model,
            config.models.embed_model,
            binary_by_topic.get(answer.topic_id, []),
            n_questions=config.rag.questions, template_dir=config.prompt_dir)
        written += store.upsert([scores])
    return written


# ----------------------------------------------------------------------
# Elo

def stage_elo(store: Store, config: PipelineConfig, gateway: Gateway,
              k: float | None = None, permutations: int | None = None,
              seed: int | None = None, force: bool = False) -> dict:
    answers = store.answers()
    if not answers:
        raise StageError("rag run", "no answers in store; run rag run first")
    elo_config = EloConfig(
        k_factor=config.elo.k if k is None else k,
        permutations=config.elo.permutations if permutations is None else permutations,
        rng_seed=config.elo.seed if seed is None else seed)

    topics = {t.topic_id: t for t in store.topics()}
    answer_by_id = {a.answer_id: a for a in answers}
    existing = {(c.topic_id, c.answer_a, c.answer_b): c
                for c in store.comparisons()}
    judged = []
    skipped = 0
    new_judgments = []
    for topic_id, a_id, b_id in schedule_pairs(answers):
        key = (topic_id, a_id, b_id)
        if key in existing and not force:
            judged.append(existing[key])
            continue
        judgment = judge_pair(topics[topic_id], answer_by_id[a_id],
                              answer_by_id[b_id], gateway,
                              config.models.pair_judge_model,
                              seed=elo_config.rng_seed,
                              template_dir=config.prompt_dir)
        if judgment is None:
            skipped += 1
            continue
        judged.append(judgment)
        new_judgments.append(judgment)
    if new_judgments:
        store.upsert(new_judgments)

    report = run_tournament(judged, elo_config, answers=answers)
    report.skipped_pairs = skipped
    out = report.to_json()
    (store.root / "elo_report.json").write_text(
        json.dumps(out, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return out


# ----------------------------------------------------------------------
# costs and report

def append_ledger(store: Store, gateway: Gateway) -> int:
    entries = gateway.ledger
    if not entries:
        return 0
    with open(store.root / "costs.jsonl", "a", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(asdict(entry), sort_keys=True) + "\n")
    return len(entries)


def load_ledger(store: Store) -> list[CostLedgerEntry]:
    path = store.root / "costs.jsonl"
    if not path.exists():
        return []
    entries = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(from_dict(CostLedgerEntry, json.loads(line)))
    return entries


def stage_report(store: Store, config: PipelineConfig) -> dict:
    report: dict = {"counts": store.counts()}

    audits = {}
    for kind in ("table_parse", "caption_parse"):
        if store.audit_labels(kind=kind):
            audits[kind] = summarize_audit(store, kind)
    if audits:
        report["audits"] = audits

    judgments = store.judgments()
    if judgments:
        by_rater = judgments_by_rater(judgments)
        raters = sorted(by_rater)
        agreement: dict = {}
        for granularity in ("four_level", "binary"):
            summary = mean_pairwise_kappa(by_rater, raters, raters,
                                          granularity=granularity)
            agreement[granularity] = {
                "mean_kappa": summary.mean_kappa,
                "pairs": [asdict(p) for p in summary.pairs],
            }
        report["agreement"] = agreement
        level_hist: dict[str, dict[str, int]] = {}
        for j in judgments:
            if j.level is not None:
                hist = level_hist.setdefault(j.judge, {})
                hist[str(j.level)] = hist.get(str(j.level), 0) + 1
        report["label_histograms"] = level_hist

    scores = store.ragas_scores()
    if scores:
        answers = {a.answer_id: a for a in store.answers()}
        by_config: dict[str, list] = {}
        for s in scores:
            answer = answers.get(s.answer_id)
            if answer:
                by_config.setdefault(answer.config_tag, []).append(s)
        ragas_report = {}
        for tag in sorted(by_config):
            group = by_config[tag]
            recalls = [s.recall for s in group if s.recall is not None]
            ragas_report[tag] = {
                "n": len(group),
                "context_relevance": _mean(s.context_relevance for s in group),
                "faithfulness": _mean(s.faithfulness for s in group),
                "answer_relevance": _mean(s.answer_relevance for s in group),
                "precision": _mean(s.precision_at_k for s in group),
                "recall": sum(recalls) / len(recalls) if recalls else None,
            }
        report["ragas"] = ragas_report

    answers = store.answers()
    if answers:
        token_report = {}
        by_config_tokens: dict[str, list[int]] = {}
        for a in answers:
            by_config_tokens.setdefault(a.config_tag, []).append(a.token_count)
        for tag in sorted(by_config_tokens):
            counts = by_config_tokens[tag]
            token_report[tag] = {
                "mean": sum(counts) / len(counts),
                "std": statistics.pstdev(counts) if len(counts) > 1 else 0.0,
            }
        report["token_counts"] = token_report

    elo_path = store.root / "elo_report.json"
    if elo_path.exists():
        report["elo"] = json.loads(elo_path.read_text(encoding="utf-8"))

    ledger = load_ledger(store)
    if ledger:
        costs = {}
        for settings in config.gateway.providers:
            costs.update(settings.costs)
        report["costs"] = {
            "overall": aggregate_cost_report(ledger, costs),
            "by_purpose": {
                purpose: aggregate_cost_report(ledger, costs, purpose=purpose)
                for purpose in sorted({e.purpose for e in ledger})},
        }

    (store.root / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return report


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)
