import pytest
from fastapi.testclient import TestClient

from tckit.agreement import cohens_kappa
from tckit.records import (Document, Passage, Qrel, RunEntry, TableArtifact,
                           Topic)
from tckit.service import (build_audit_tasks, build_relevance_tasks,
                           create_app)


@pytest.fixture
def labeled_store(store):
    text = " ".join(f"sentence {i} about hygiene." for i in range(40))
    store.upsert([Document(doc_id="d1", full_text=text),
                  Topic(topic_id="t1", title="hand hygiene",
                        description="infection rates",
                        narrative="clinical settings")])
    passages = [Passage(passage_id=f"d1#{i}", doc_id="d1",
                        char_start=i, char_end=i + 10,
                        text=text[i:i + 10]) for i in range(12)]
    table = TableArtifact.from_grid(
        "d1/t0", "d1", [["a", "b"], ["c", "d"], ["e", "f"]],
        caption="Table 1: Numbers", intext_refs=("see Table 1",))
    store.upsert(passages + [table])
    entries = [RunEntry("t1", f"d1#{i}", "passage", i + 1, 1.0 / (i + 1),
                        "pool-passage") for i in range(12)]
    entries += [RunEntry("t1", "d1/t0", "table", 1, 1.0, "pool-table")]
    store.upsert(entries)
    return store


@pytest.fixture
def client(labeled_store):
    with pytest.warns(UserWarning):  # table pool shorter than top+bottom
        tasks = build_relevance_tasks(labeled_store)
    tasks += [t.__class__(**{**t.__dict__, "index": len(tasks) + t.index})
              for t in build_audit_tasks(labeled_store, "table_audit", 1)]
    app = create_app(labeled_store, tasks)
    return TestClient(app)


def test_next_task_is_lowest_index(client):
    task = client.get("/api/tasks/next",
                      params={"annotator": "ann1"}).json()
    assert task["index"] == 0
    assert task["kind"] == "relevance"
    assert task["allowed"] == ["0", "1", "2", "3"]
    assert task["topic"]["title"] == "hand hygiene"


def test_two_annotators_receive_same_task(client):
    t1 = client.get("/api/tasks/next", params={"annotator": "ann1"}).json()
    t2 = client.get("/api/tasks/next", params={"annotator": "ann2"}).json()
    assert t1["task_id"] == t2["task_id"]


def test_unknown_kind_is_400(client):
    response = client.get("/api/tasks/next",
                          params={"annotator": "a", "kind": "vibes"})
    assert response.status_code == 400


def test_label_round_trip_and_advance(client, labeled_store):
    task = client.get("/api/tasks/next", params={"annotator": "ann1"}).json()
    response = client.post("/api/labels", json={
        "task_id": task["task_id"], "annotator": "ann1", "verdict": "2"})
    assert response.status_code == 201
    judgments = labeled_store.judgments(judge="ann1")
    assert len(judgments) == 1
    assert judgments[0].level == 2
    following = client.get("/api/tasks/next",
                           params={"annotator": "ann1"}).json()
    assert following["index"] == task["index"] + 1


def test_queue_exhaustion_204(client):
    while True:
        response = client.get("/api/tasks/next", params={"annotator": "solo"})
        if response.status_code == 204:
            break
        task = response.json()
        verdict = task["allowed"][0]
        assert client.post("/api/labels", json={
            "task_id": task["task_id"], "annotator": "solo",
            "verdict": verdict}).status_code == 201
    assert client.get("/api/tasks/next",
                      params={"annotator": "solo"}).status_code == 204


def test_invalid_verdict_422(client):
    task = client.get("/api/tasks/next", params={"annotator": "a"}).json()
    response = client.post("/api/labels", json={
        "task_id": task["task_id"], "annotator": "a", "verdict": "5"})
    assert response.status_code == 422


def test_unknown_task_404(client):
    response = client.post("/api/labels", json={
        "task_id": "relevance:passage:t1:ghost", "annotator": "a",
        "verdict": "1"})
    assert response.status_code == 404


def test_audit_label_stored(client, labeled_store):
    task = client.get("/api/tasks/next",
                      params={"annotator": "a", "kind": "table_audit"}).json()
    assert task["payload"]["grid"] == [["a", "b"], ["c", "d"], ["e", "f"]]
    assert task["payload"]["caption"] == "Table 1: Numbers"
    response = client.post("/api/labels", json={
        "task_id": task["task_id"], "annotator": "a",
        "verdict": "misclassified"})
    assert response.status_code == 201
    labels = labeled_store.audit_labels(kind="table_parse")
    assert labels[0].verdict == "misclassified"


def test_resubmission_overwrites(client, labeled_store):
    task = client.get("/api/tasks/next", params={"annotator": "a"}).json()
    for verdict in ("1", "3"):
        client.post("/api/labels", json={"task_id": task["task_id"],
                                         "annotator": "a", "verdict": verdict})
    judgments = labeled_store.judgments(judge="a")
    assert len(judgments) == 1
    assert judgments[0].level == 3


def label_everything(client, annotator, choose):
    index = 0
    while True:
        response = client.get("/api/tasks/next",
                              params={"annotator": annotator})
        if response.status_code == 204:
            return
        task = response.json()
        client.post("/api/labels", json={"task_id": task["task_id"],
                                         "annotator": annotator,
                                         "verdict": choose(index)})
        index += 1


def test_agreement_endpoint_matches_direct_kappa(client):
    label_everything(client, "ann1", lambda i: str(i % 4))
    label_everything(client, "ann2", lambda i: str((i + (i % 3 == 0)) % 4))
    response = client.get("/api/agreement",
                          params={"a": "ann1", "b": "ann2",
                                  "granularity": "four_level"})
    body = response.json()
    a = [i % 4 for i in range(body["n_items"])]
    b = [(i + (i % 3 == 0)) % 4 for i in range(body["n_items"])]
    assert body["kappa"] == pytest.approx(cohens_kappa(a, b))
    binary = client.get("/api/agreement",
                        params={"a": "ann1", "b": "ann2",
                                "granularity": "binary"}).json()
    assert binary["granularity"] == "binary"
    assert -1.0 <= binary["kappa"] <= 1.0


def test_agreement_self_is_one(client):
    label_everything(client, "solo", lambda i: str(i % 4))
    body = client.get("/api/agreement",
                      params={"a": "solo", "b": "solo"}).json()
    assert body["kappa"] == 1.0


def test_agreement_insufficient_overlap_409(client):
    response = client.get("/api/agreement",
                          params={"a": "nobody", "b": "ann1"})
    assert response.status_code == 409


def test_progress_counts(client):
    total = client.get("/api/progress",
                       params={"annotator": "p1"}).json()["relevance"]["total"]
    for _ in range(3):
        task = client.get("/api/tasks/next", params={"annotator": "p1"}).json()
        client.post("/api/labels", json={"task_id": task["task_id"],
                                         "annotator": "p1", "verdict": "0"})
    progress = client.get("/api/progress", params={"annotator": "p1"}).json()
    assert progress["relevance"] == {"labeled": 3, "total": total}


def test_assigned_tasks_restrict_annotators(labeled_store):
    with pytest.warns(UserWarning):
        tasks = build_relevance_tasks(labeled_store,
                                      annotators=("ann1", "ann2", "ann3"),
                                      copies=2)
    app = create_app(labeled_store, tasks)
    client = TestClient(app)
    per_annotator = {}
    for annotator in ("ann1", "ann2", "ann3"):
        progress = client.get("/api/progress",
                              params={"annotator": annotator}).json()
        per_annotator[annotator] = progress["relevance"]["total"]
    # 11 items dealt twice over three annotators
    assert sum(per_annotator.values()) == 2 * len(
        {t.item_id for t in tasks})
