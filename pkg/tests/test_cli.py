import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from tckit import toydata
from tckit.cli import main
from tckit.store import Store


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path):
    inputs = toydata.write_toy_inputs(tmp_path / "inputs")
    config_path = tmp_path / "config.yaml"
    config_path.write_text(f"store: {tmp_path / 'store'}\n")
    return {"inputs": inputs, "config": str(config_path),
            "store": tmp_path / "store"}


def invoke(runner, workspace, *args):
    return runner.invoke(main, ["--config", workspace["config"], *args],
                         catch_exceptions=False)


def test_pool_before_index_exits_3(runner, workspace):
    invoke(runner, workspace, "ingest",
           "--parsed", workspace["inputs"]["parsed_dir"],
           "--topics", workspace["inputs"]["topics_path"])
    result = invoke(runner, workspace, "pool")
    assert result.exit_code == 3
    error = json.loads(result.output.strip().splitlines()[-1])
    assert error["missing"] == "index"
    assert "index" in error["error"]


def test_unknown_subcommand_usage_exit_2(runner, workspace):
    result = runner.invoke(main, ["--config", workspace["config"], "frobnicate"])
    assert result.exit_code == 2


def test_ingest_chunk_index_flow(runner, workspace):
    result = invoke(runner, workspace, "ingest",
                    "--parsed", workspace["inputs"]["parsed_dir"],
                    "--topics", workspace["inputs"]["topics_path"],
                    "--qrels", workspace["inputs"]["qrels_path"])
    assert result.exit_code == 0
    summary = json.loads(result.output)
    assert summary["documents"] == 20
    assert summary["tables"] == 6
    assert summary["topics"] == 3

    result = invoke(runner, workspace, "chunk", "--size", "512",
                    "--overlap", "100")
    assert result.exit_code == 0
    first = json.loads(result.output)["passages"]
    assert first > 0

    # idempotent: second run writes nothing
    result = invoke(runner, workspace, "chunk")
    assert json.loads(result.output)["passages"] == 0

    result = invoke(runner, workspace, "index")
    assert result.exit_code == 0
    assert (workspace["store"] / "indexes" / "passage-bm25.json").exists()
    assert (workspace["store"] / "indexes" / "table-dense.json").exists()


def test_assess_idempotent_no_duplicates(runner, workspace):
    invoke(runner, workspace, "ingest",
           "--parsed", workspace["inputs"]["parsed_dir"],
           "--topics", workspace["inputs"]["topics_path"],
           "--qrels", workspace["inputs"]["qrels_path"])
    invoke(runner, workspace, "chunk")
    invoke(runner, workspace, "index")
    result = invoke(runner, workspace, "pool", "--modality", "table",
                    "--depth", "50")
    assert result.exit_code == 0

    result = invoke(runner, workspace, "assess", "--modality", "table")
    assert result.exit_code == 0
    written = json.loads(result.output)["judgments"]
    assert written > 0
    n_before = len(Store(workspace["store"]).judgments())

    result = invoke(runner, workspace, "assess", "--modality", "table")
    assert json.loads(result.output)["judgments"] == 0
    assert len(Store(workspace["store"]).judgments()) == n_before


def test_agree_and_report(runner, workspace):
    invoke(runner, workspace, "ingest",
           "--parsed", workspace["inputs"]["parsed_dir"],
           "--topics", workspace["inputs"]["topics_path"],
           "--qrels", workspace["inputs"]["qrels_path"])
    invoke(runner, workspace, "chunk")
    invoke(runner, workspace, "index")
    invoke(runner, workspace, "pool", "--modality", "table")
    invoke(runner, workspace, "assess", "--modality", "table")

    result = invoke(runner, workspace, "agree", "--a", "judge-a-mock",
                    "--b", "judge-*-mock", "--granularity", "binary")
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert body["granularity"] == "binary"
    assert len(body["pairs"]) == 2  # a-b and a-c

    result = invoke(runner, workspace, "report")
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert "agreement" in report and "counts" in report
    assert (workspace["store"] / "report.json").exists()


def test_rag_score_requires_answers(runner, workspace):
    invoke(runner, workspace, "ingest",
           "--parsed", workspace["inputs"]["parsed_dir"],
           "--topics", workspace["inputs"]["topics_path"])
    result = invoke(runner, workspace, "rag", "score")
    assert result.exit_code == 3
    assert json.loads(result.output.strip().splitlines()[-1])["missing"] == "rag run"


def test_elo_requires_answers(runner, workspace):
    result = invoke(runner, workspace, "elo", "run")
    assert result.exit_code == 3
