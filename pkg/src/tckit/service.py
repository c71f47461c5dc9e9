"""HTTP JSON API for the human-in-the-loop annotation UI.

Stateless by design: the annotator id travels as a request parameter
(the annotator pool is a small trusted group, so there is no auth
layer). Every annotator sees the full queue independently; overlapping
labels are exactly what makes agreement computable. Tables travel as
structured JSON (grid + caption + refs), leaving rendering to the client.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .agreement import binarize_labels, cohens_kappa, judgments_by_rater
from .assessment import select_human_sample
from .errors import ValidationError
from .extraction import sample_for_audit
from .records import (AUDIT_KINDS, CAPTION_PARSE_VERDICTS,
                      RELEVANCE_LEVEL_NAMES, TABLE_PARSE_VERDICTS, AuditLabel,
                      Judgment)
from .store import Store

TASK_KINDS = ("relevance", "table_audit", "caption_audit")
_AUDIT_KIND_OF_TASK = {"table_audit": "table_parse",
                       "caption_audit": "caption_parse"}

RELEVANCE_VERDICTS = ("0", "1", "2", "3")


@dataclass(frozen=True)
class LabelTask:
    task_id: str
    index: int
    kind: str
    modality: str | None
    item_id: str
    topic: dict | None
    payload: dict
    allowed: tuple[str, ...]
    assigned: tuple[str, ...] | None = None


class LabelSubmission(BaseModel):
    task_id: str
    annotator: str
    verdict: str


def _table_payload(table) -> dict:
    return {"table_id": table.table_id, "grid": [list(r) for r in table.cells],
            "caption": table.caption, "label": table.label,
            "intext_refs": list(table.intext_refs)}


def build_relevance_tasks(store: Store, modalities=("passage", "table"),
                          top_n: int = 5, bottom_n: int = 5,
                          annotators=None, copies: int = 2) -> list[LabelTask]:
    """Relevance queue from the pooled runs: top and bottom of each pool.

    When ``annotators`` is given, each (topic, item) is dealt to
    ``copies`` of them round-robin, and tasks carry that restriction.
    """
    from .assessment import assign_human_tasks

    tasks: list[LabelTask] = []
    keys: list[tuple[str, str, str]] = []
    for modality in modalities:
        entries = store.run_entries(f"pool-{modality}")
        by_topic: dict[str, list[str]] = {}
        for e in entries:
            by_topic.setdefault(e.topic_id, []).append(e.item_id)
        for topic_id in sorted(by_topic):
            sampled = select_human_sample(by_topic[topic_id],
                                          top_n=top_n, bottom_n=bottom_n)
            for item_id in sampled:
                keys.append((modality, topic_id, item_id))

    assigned_to: dict[tuple[str, str, str], tuple[str, ...]] = {}
    if annotators:
        dealt = assign_human_tasks(keys, annotators, copies=copies)
        for annotator, item_keys in dealt.items():
            for key in item_keys:
                assigned_to[key] = tuple(sorted(
                    (*assigned_to.get(key, ()), annotator)))

    for index, (modality, topic_id, item_id) in enumerate(keys):
        topic = store.get_topic(topic_id)
        if modality == "passage":
            item = store.get_passage(item_id)
            payload = {"passage_id": item_id, "text": item.text if item else ""}
        else:
            table = store.get_table(item_id)
            payload = _table_payload(table) if table else {"table_id": item_id}
        tasks.append(LabelTask(
            task_id=f"relevance:{modality}:{topic_id}:{item_id}",
            index=index, kind="relevance", modality=modality,
            item_id=item_id,
            topic={"topic_id": topic_id,
                   "title": topic.title if topic else "",
                   "description": topic.description if topic else None,
                   "narrative": topic.narrative if topic else None},
            payload={**payload,
                     "level_names": {str(k): v for k, v
                                     in RELEVANCE_LEVEL_NAMES.items()}},
            allowed=RELEVANCE_VERDICTS,
            assigned=assigned_to.get((modality, topic_id, item_id))))
    return tasks


def build_audit_tasks(store: Store, kind: str, n: int,
                      seed: int = 0) -> list[LabelTask]:
    """Audit queue over a deterministic random sample of tables."""
    audit_kind = _AUDIT_KIND_OF_TASK.get(kind)
    if audit_kind is None:
        raise ValidationError(f"kind: unknown task kind {kind!r}")
    allowed = (TABLE_PARSE_VERDICTS if audit_kind == "table_parse"
               else CAPTION_PARSE_VERDICTS)
    population = sample_for_audit(store, audit_kind, n, seed)
    tasks = []
    for index, table_id in enumerate(population):
        table = store.get_table(table_id)
        tasks.append(LabelTask(
            task_id=f"{kind}:{table_id}", index=index, kind=kind,
            modality="table", item_id=table_id, topic=None,
            payload=_table_payload(table), allowed=tuple(allowed)))
    return tasks


def _labeled_by(store: Store, task: LabelTask, annotator: str) -> bool:
    if task.kind == "relevance":
        return any(j.item_id == task.item_id
                   for j in store.judgments(topic_id=task.topic["topic_id"],
                                            judge=annotator))
    audit_kind = _AUDIT_KIND_OF_TASK[task.kind]
    return any(a.item_id == task.item_id and a.annotator == annotator
               for a in store.audit_labels(kind=audit_kind))


def create_app(store: Store, tasks: list[LabelTask],
               ui_origin: str = "*") -> FastAPI:
    app = FastAPI(title="annotation service")
    app.add_middleware(CORSMiddleware, allow_origins=[ui_origin],
                       allow_methods=["*"], allow_headers=["*"])
    task_by_id = {t.task_id: t for t in tasks}

    @app.get("/api/tasks/next")
    def next_task(annotator: str, kind: str = "relevance",
                  modality: str | None = None):
        if kind not in TASK_KINDS:
            return Response(status_code=400,
                            content=f"unknown kind {kind!r}")
        for task in sorted(tasks, key=lambda t: t.index):
            if task.kind != kind:
                continue
            if modality is not None and task.modality != modality:
                continue
            if task.assigned is not None and annotator not in task.assigned:
                continue
            if _labeled_by(store, task, annotator):
                continue
            return asdict(task)
        return Response(status_code=204)

    @app.post("/api/labels", status_code=201)
    def submit_label(submission: LabelSubmission):
        task = task_by_id.get(submission.task_id)
        if task is None:
            return Response(status_code=404,
                            content=f"unknown task {submission.task_id!r}")
        if submission.verdict not in task.allowed:
            return Response(status_code=422,
                            content=f"verdict {submission.verdict!r} not in "
                                    f"allowed set {list(task.allowed)}")
        if task.kind == "relevance":
            record = Judgment(
                topic_id=task.topic["topic_id"], item_id=task.item_id,
                modality=task.modality, level=int(submission.verdict),
                judge=submission.annotator)
        else:
            record = AuditLabel(
                item_id=task.item_id, kind=_AUDIT_KIND_OF_TASK[task.kind],
                verdict=submission.verdict, annotator=submission.annotator)
        store.upsert([record])
        return {"stored": submission.task_id, "verdict": submission.verdict}

    @app.get("/api/agreement")
    def agreement(a: str, b: str, granularity: str = "four_level"):
        if granularity not in ("four_level", "binary"):
            return Response(status_code=400,
                            content=f"unknown granularity {granularity!r}")
        by_rater = judgments_by_rater(store.judgments())
        shared = sorted(set(by_rater.get(a, {})) & set(by_rater.get(b, {})))
        if len(shared) < 2:
            return Response(
                status_code=409,
                content=f"only {len(shared)} co-labeled items between "
                        f"{a!r} and {b!r}; need at least 2")
        va = [by_rater[a][i] for i in shared]
        vb = [by_rater[b][i] for i in shared]
        if granularity == "binary":
            va = binarize_labels(va)
            vb = binarize_labels(vb)
        return {"rater_a": a, "rater_b": b, "n_items": len(shared),
                "kappa": cohens_kappa(va, vb), "granularity": granularity}

    @app.get("/api/progress")
    def progress(annotator: str):
        out = {}
        for kind in TASK_KINDS:
            available = [t for t in tasks if t.kind == kind
                         and (t.assigned is None or annotator in t.assigned)]
            labeled = sum(1 for t in available
                          if _labeled_by(store, t, annotator))
            out[kind] = {"labeled": labeled, "total": len(available)}
        return out

    @app.get("/api/raters")
    def raters():
        return {"raters": sorted({j.judge for j in store.judgments()})}

    return app
