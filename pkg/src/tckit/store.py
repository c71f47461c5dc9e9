"""Directory-backed collection store.

One JSONL file per record type plus a content-addressed blob directory.
Files are rewritten sorted by record key on every write, so a store
produced twice from the same inputs is byte-identical. Qrels and runs
additionally import from / export to the conventional TREC text formats.

Writes are serialized by a lock (single-writer); reads of loaded
collections are safe from any thread since records are immutable.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from . import records as rec
from .errors import ConfigError, NotFoundError, ParseError, ReferentialError

# collection name -> (record class, key function)
_COLLECTIONS = {
    "documents": (rec.Document, lambda r: (r.doc_id,)),
    "tables": (rec.TableArtifact, lambda r: (r.table_id,)),
    "figures": (rec.FigureArtifact, lambda r: (r.figure_id,)),
    "passages": (rec.Passage, lambda r: (r.passage_id,)),
    "topics": (rec.Topic, lambda r: (r.topic_id,)),
    "qrels": (rec.Qrel, lambda r: (r.topic_id, r.item_id, r.source)),
    "runs": (rec.RunEntry, lambda r: (r.run_tag, r.topic_id, r.item_id)),
    "judgments": (rec.Judgment, lambda r: (r.topic_id, r.item_id, r.judge)),
    "audit_labels": (rec.AuditLabel, lambda r: (r.item_id, r.kind, r.annotator)),
    "answers": (rec.RagAnswer, lambda r: (r.answer_id,)),
    "comparisons": (rec.PairJudgment,
                    lambda r: (r.topic_id, r.answer_a, r.answer_b, r.judge)),
    "ragas_scores": (rec.RagasScores, lambda r: (r.answer_id,)),
    "variants": (rec.QueryVariantSet, lambda r: (r.topic_id,)),
}

_TYPE_TO_COLLECTION = {cls: name for name, (cls, _) in _COLLECTIONS.items()}


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._cache: dict[str, dict[tuple, object]] = {}

    # ------------------------------------------------------------------
    # generic persistence

    def _path(self, collection: str) -> Path:
        return self.root / f"{collection}.jsonl"

    def _load(self, collection: str) -> dict[tuple, object]:
        if collection in self._cache:
            return self._cache[collection]
        cls, keyfn = _COLLECTIONS[collection]
        data: dict[tuple, object] = {}
        path = self._path(collection)
        if path.exists():
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = rec.from_dict(cls, json.loads(line))
                    data[keyfn(record)] = record
        self._cache[collection] = data
        return data

    def _flush(self, collection: str) -> None:
        data = self._cache[collection]
        lines = [
            json.dumps(rec.to_dict(data[key]), sort_keys=True, ensure_ascii=False)
            for key in sorted(data)
        ]
        self._path(collection).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8")

    def upsert(self, items) -> int:
        """Validate and persist records; re-upserting a key overwrites.

        Raises ValidationError on invariant breaches and ReferentialError
        when a passage/table/figure points at an unknown document.
        """
        grouped: dict[str, list] = {}
        for item in items:
            collection = _TYPE_TO_COLLECTION.get(type(item))
            if collection is None:
                raise ConfigError(f"unsupported record type {type(item).__name__}")
            grouped.setdefault(collection, []).append(item)

        with self._lock:
            batch_doc_ids = {d.doc_id for d in grouped.get("documents", ())}

            def check_doc(doc_id: str, what: str) -> None:
                if doc_id in batch_doc_ids:
                    return
                if (doc_id,) not in self._load("documents"):
                    raise ReferentialError(
                        f"{what} references unknown doc_id {doc_id!r}")

            for collection, batch in grouped.items():
                for item in batch:
                    item.validate()
                    if collection in ("tables", "figures"):
                        check_doc(item.doc_id, type(item).__name__)
                    elif collection == "passages":
                        check_doc(item.doc_id, "Passage")
                        doc = grouped_doc = None
                        for d in grouped.get("documents", ()):
                            if d.doc_id == item.doc_id:
                                grouped_doc = d
                        doc = grouped_doc or self.get_document(item.doc_id)
                        if doc is not None and doc.full_text is not None:
                            item.validate_against(doc.full_text)

            count = 0
            for collection, batch in grouped.items():
                _, keyfn = _COLLECTIONS[collection]
                data = self._load(collection)
                for item in batch:
                    data[keyfn(item)] = item
                    count += 1
                if collection == "runs":
                    self._check_run_coherence(data, batch)
                self._flush(collection)
            return count

    @staticmethod
    def _check_run_coherence(data: dict, batch) -> None:
        """Within each touched (run_tag, topic): ranks 1..n, scores non-increasing."""
        touched = {(e.run_tag, e.topic_id) for e in batch}
        for run_tag, topic_id in touched:
            group = sorted(
                (e for e in data.values()
                 if e.run_tag == run_tag and e.topic_id == topic_id),
                key=lambda e: e.rank)
            ranks = [e.rank for e in group]
            if ranks != list(range(1, len(group) + 1)):
                raise rec.ValidationError(
                    f"rank: run {run_tag!r} topic {topic_id!r} ranks are not 1..n")
            for prev, cur in zip(group, group[1:]):
                if cur.score > prev.score:
                    raise rec.ValidationError(
                        f"score: run {run_tag!r} topic {topic_id!r} "
                        f"scores increase at rank {cur.rank}")

    def _all(self, collection: str) -> list:
        with self._lock:
            data = self._load(collection)
            return [data[key] for key in sorted(data)]

    # ------------------------------------------------------------------
    # typed readers

    def documents(self) -> list[rec.Document]:
        return self._all("documents")

    def get_document(self, doc_id: str) -> rec.Document | None:
        return self._load("documents").get((doc_id,))

    def tables(self) -> list[rec.TableArtifact]:
        return self._all("tables")

    def get_table(self, table_id: str) -> rec.TableArtifact | None:
        return self._load("tables").get((table_id,))

    def figures(self) -> list[rec.FigureArtifact]:
        return self._all("figures")

    def passages(self) -> list[rec.Passage]:
        return self._all("passages")

    def get_passage(self, passage_id: str) -> rec.Passage | None:
        return self._load("passages").get((passage_id,))

    def topics(self) -> list[rec.Topic]:
        return self._all("topics")

    def get_topic(self, topic_id: str) -> rec.Topic | None:
        return self._load("topics").get((topic_id,))

    def qrels(self, topic_id: str | None = None, source: str | None = None,
              modality: str | None = None) -> list[rec.Qrel]:
        out = self._all("qrels")
        if topic_id is not None:
            out = [q for q in out if q.topic_id == topic_id]
        if source is not None:
            out = [q for q in out if q.source == source]
        if modality is not None:
            out = [q for q in out if q.modality == modality]
        return out

    def judgments(self, topic_id: str | None = None, judge: str | None = None,
                  modality: str | None = None) -> list[rec.Judgment]:
        out = self._all("judgments")
        if topic_id is not None:
            out = [j for j in out if j.topic_id == topic_id]
        if judge is not None:
            out = [j for j in out if j.judge == judge]
        if modality is not None:
            out = [j for j in out if j.modality == modality]
        return out

    def audit_labels(self, kind: str | None = None) -> list[rec.AuditLabel]:
        out = self._all("audit_labels")
        if kind is not None:
            out = [a for a in out if a.kind == kind]
        return out

    def answers(self, topic_id: str | None = None) -> list[rec.RagAnswer]:
        out = self._all("answers")
        if topic_id is not None:
            out = [a for a in out if a.topic_id == topic_id]
        return out

    def get_answer(self, answer_id: str) -> rec.RagAnswer | None:
        return self._load("answers").get((answer_id,))

    def comparisons(self) -> list[rec.PairJudgment]:
        return self._all("comparisons")

    def ragas_scores(self) -> list[rec.RagasScores]:
        return self._all("ragas_scores")

    def variants(self) -> list[rec.QueryVariantSet]:
        return self._all("variants")

    def get_variants(self, topic_id: str) -> rec.QueryVariantSet | None:
        return self._load("variants").get((topic_id,))

    def run_tags(self) -> list[str]:
        return sorted({e.run_tag for e in self._all("runs")})

    def run_entries(self, run_tag: str) -> list[rec.RunEntry]:
        """Entries of one run in (topic, rank) order."""
        entries = [e for e in self._all("runs") if e.run_tag == run_tag]
        entries.sort(key=lambda e: (e.topic_id, e.rank))
        return entries

    # ------------------------------------------------------------------
    # TREC text interchange

    def import_trec_qrels(self, path: str | Path, modality: str,
                          source: str = "imported") -> int:
        """Read a 4-column TREC qrels file (topic iter item level)."""
        if modality not in rec.MODALITIES:
            raise ConfigError(f"unknown modality {modality!r}")
        if source not in rec.QREL_SCALES:
            raise ConfigError(f"unknown source {source!r}")
        qrels = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ParseError(
                        f"expected 4 columns, got {len(parts)}",
                        path=str(path), line=lineno)
                topic_id, _iteration, item_id, level = parts
                try:
                    level_int = int(level)
                except ValueError:
                    raise ParseError(f"non-integer level {level!r}",
                                     path=str(path), line=lineno) from None
                qrels.append(rec.Qrel(topic_id=topic_id, item_id=item_id,
                                      modality=modality, level=level_int,
                                      source=source))
        return self.upsert(qrels)

    def export_trec_qrels(self, path: str | Path,
                          source: str | None = None) -> int:
        qrels = self.qrels(source=source)
        qrels.sort(key=lambda q: (q.topic_id, q.item_id, q.source))
        with open(path, "w", encoding="utf-8") as fh:
            for q in qrels:
                fh.write(f"{q.topic_id} 0 {q.item_id} {q.level}\n")
        return len(qrels)

    def import_trec_run(self, path: str | Path, modality: str,
                        run_tag: str | None = None) -> int:
        """Read a 6-column TREC run file (topic Q0 item rank score tag)."""
        if modality not in rec.MODALITIES:
            raise ConfigError(f"unknown modality {modality!r}")
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != 6:
                    raise ParseError(
                        f"expected 6 columns, got {len(parts)}",
                        path=str(path), line=lineno)
                topic_id, _q0, item_id, rank, score, tag = parts
                try:
                    entries.append(rec.RunEntry(
                        topic_id=topic_id, item_id=item_id, modality=modality,
                        rank=int(rank), score=float(score),
                        run_tag=run_tag or tag))
                except ValueError:
                    raise ParseError("non-numeric rank or score",
                                     path=str(path), line=lineno) from None
        return self.upsert(entries)

    def export_run(self, run_tag: str, path: str | Path) -> int:
        """Write a run in TREC format, (topic, rank) ordered."""
        if run_tag not in self.run_tags():
            raise NotFoundError(f"unknown run_tag {run_tag!r}")
        entries = self.run_entries(run_tag)
        with open(path, "w", encoding="utf-8") as fh:
            for e in entries:
                fh.write(f"{e.topic_id} Q0 {e.item_id} {e.rank} "
                         f"{format_score(e.score)} {e.run_tag}\n")
        return len(entries)

    # ------------------------------------------------------------------
    # content-addressed blobs

    def put_blob(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        ref = f"sha256:{digest}"
        path = self.root / "blobs" / digest[:2] / digest
        if not path.exists():
            with self._lock:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(data)
        return ref

    def get_blob(self, ref: str) -> bytes:
        if not ref.startswith("sha256:"):
            raise NotFoundError(f"malformed blob ref {ref!r}")
        digest = ref.split(":", 1)[1]
        path = self.root / "blobs" / digest[:2] / digest
        if not path.exists():
            raise NotFoundError(f"blob {ref!r} not stored")
        return path.read_bytes()

    def has_blob(self, ref: str) -> bool:
        digest = ref.split(":", 1)[1] if ref.startswith("sha256:") else ""
        return (self.root / "blobs" / digest[:2] / digest).exists()

    # ------------------------------------------------------------------

    def counts(self) -> dict[str, int]:
        return {name: len(self._load(name)) for name in sorted(_COLLECTIONS)}


def format_score(score: float) -> str:
    """Render a score compactly: integers without a trailing .0."""
    if score == int(score):
        return str(int(score))
    return repr(score)
