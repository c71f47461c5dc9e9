import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tckit.errors import (ConfigError, NotFoundError, ParseError,
                          ReferentialError, ValidationError)
from tckit.records import Document, Passage, Qrel, RunEntry, TableArtifact, Topic
from tckit.store import Store


def make_doc(doc_id="d1", text="hello world of retrieval"):
    return Document(doc_id=doc_id, full_text=text)


def test_upsert_counts_records(store):
    docs = [make_doc(f"d{i}") for i in range(3)]
    assert store.upsert(docs) == 3
    assert [d.doc_id for d in store.documents()] == ["d0", "d1", "d2"]


def test_upsert_rejects_bad_passage_range(store):
    store.upsert([make_doc()])
    bad = Passage(passage_id="p1", doc_id="d1", char_start=0, char_end=9999,
                  text="x" * 9999)
    with pytest.raises(ValidationError, match="char_end"):
        store.upsert([bad])


def test_passage_text_must_match_offsets(store):
    store.upsert([make_doc()])
    bad = Passage(passage_id="p1", doc_id="d1", char_start=0, char_end=5,
                  text="XXXXX")
    with pytest.raises(ValidationError, match="text"):
        store.upsert([bad])


def test_last_write_wins(store):
    store.upsert([Document(doc_id="d1", title="first")])
    store.upsert([Document(doc_id="d1", title="second")])
    assert store.get_document("d1").title == "second"
    assert len(store.documents()) == 1


def test_referential_integrity(store):
    table = TableArtifact.from_grid("t1", "missing-doc", [["a"], ["b"]])
    with pytest.raises(ReferentialError, match="missing-doc"):
        store.upsert([table])


def test_same_batch_doc_reference_ok(store):
    doc = make_doc("d9")
    passage = Passage(passage_id="p1", doc_id="d9", char_start=0, char_end=5,
                      text="hello")
    assert store.upsert([doc, passage]) == 2


def test_deterministic_reads(store):
    store.upsert([make_doc(f"d{i}") for i in range(5)])
    assert store.documents() == store.documents()


def test_reload_from_disk(store):
    store.upsert([make_doc("d1"), Topic(topic_id="t1", title="a topic")])
    fresh = Store(store.root)
    assert fresh.get_document("d1") == store.get_document("d1")
    assert fresh.get_topic("t1").title == "a topic"


def test_import_trec_qrels(store, tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("1 0 d42 2\n\n2 0 d7 0\n")
    assert store.import_trec_qrels(path, modality="document") == 2
    qrel = store.qrels(topic_id="1")[0]
    assert (qrel.item_id, qrel.level, qrel.source) == ("d42", 2, "imported")


def test_import_trec_qrels_empty_file(store, tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("")
    assert store.import_trec_qrels(path, modality="document") == 0


def test_import_trec_qrels_malformed_line(store, tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("1 0 d42 2\n1 d43 2\n")
    with pytest.raises(ParseError, match="line 2"):
        store.import_trec_qrels(path, modality="document")


def test_import_trec_qrels_unknown_modality(store, tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("1 0 d42 2\n")
    with pytest.raises(ConfigError, match="modality"):
        store.import_trec_qrels(path, modality="video")


def test_export_run_format(store, tmp_path):
    store.upsert([RunEntry(topic_id="1", item_id="t7", modality="table",
                           rank=1, score=0.5, run_tag="bm25")])
    out = tmp_path / "run.txt"
    assert store.export_run("bm25", out) == 1
    assert out.read_text() == "1 Q0 t7 1 0.5 bm25\n"


def test_export_unknown_run(store, tmp_path):
    with pytest.raises(NotFoundError, match="nope"):
        store.export_run("nope", tmp_path / "run.txt")


def test_run_round_trip(store, tmp_path):
    entries = [
        RunEntry("1", "a", "passage", 1, 2.5, "sys"),
        RunEntry("1", "b", "passage", 2, 1.25, "sys"),
        RunEntry("2", "c", "passage", 1, 9.0, "sys"),
    ]
    store.upsert(entries)
    path = tmp_path / "run.txt"
    store.export_run("sys", path)

    other = Store(tmp_path / "other")
    other.import_trec_run(path, modality="passage")
    triples = [(e.topic_id, e.item_id, e.rank) for e in other.run_entries("sys")]
    assert triples == [(e.topic_id, e.item_id, e.rank) for e in entries]


def test_run_coherence_rejects_rank_gap(store):
    with pytest.raises(ValidationError, match="ranks"):
        store.upsert([RunEntry("1", "a", "passage", 1, 2.0, "sys"),
                      RunEntry("1", "b", "passage", 3, 1.0, "sys")])


def test_run_coherence_rejects_increasing_scores(store):
    with pytest.raises(ValidationError, match="score"):
        store.upsert([RunEntry("1", "a", "passage", 1, 1.0, "sys"),
                      RunEntry("1", "b", "passage", 2, 2.0, "sys")])


def test_qrel_scale_enforced(store):
    with pytest.raises(ValidationError, match="level"):
        store.upsert([Qrel("1", "x", "table", 3, "imported")])
    store.upsert([Qrel("1", "x", "table", 3, "synthetic")])


def test_blob_content_addressing(store):
    ref1 = store.put_blob(b"%PDF-1.4 payload")
    ref2 = store.put_blob(b"%PDF-1.4 payload")
    assert ref1 == ref2
    assert store.get_blob(ref1) == b"%PDF-1.4 payload"
    assert store.has_blob(ref1)
    with pytest.raises(NotFoundError):
        store.get_blob("sha256:" + "0" * 64)


run_groups = st.lists(
    st.lists(st.floats(min_value=0.0, max_value=100.0,
                       allow_nan=False).map(lambda x: round(x, 4)),
             min_size=1, max_size=8),
    min_size=1, max_size=4)


@settings(max_examples=25, deadline=None)
@given(groups=run_groups)
def test_run_round_trip_property(tmp_path_factory, groups):
    """Export after import reproduces (topic, item, rank) exactly."""
    root = tmp_path_factory.mktemp("prop")
    store = Store(root / "s1")
    entries = []
    for t, scores in enumerate(groups):
        for rank, score in enumerate(sorted(scores, reverse=True), start=1):
            entries.append(RunEntry(str(t), f"item{rank}", "passage",
                                    rank, score, "sys"))
    store.upsert(entries)
    path = root / "run.txt"
    store.export_run("sys", path)
    other = Store(root / "s2")
    other.import_trec_run(path, modality="passage")
    assert [(e.topic_id, e.item_id, e.rank) for e in other.run_entries("sys")] \
        == [(e.topic_id, e.item_id, e.rank) for e in store.run_entries("sys")]
