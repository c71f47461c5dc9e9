#!/usr/bin/env python3
"""Run the full offline pipeline on the toy collection.

Usage: python scripts/run_mock_pipeline.py [workdir]

Builds the toy inputs, then runs ingest -> chunk -> index -> pool ->
assess -> rag run -> rag score -> elo run -> report against the mock
gateway. The resulting store is deterministic: running this script twice
into two directories yields byte-identical files.
"""

import json
import sys
import time
from pathlib import Path

from tckit import pipeline
from tckit.config import PipelineConfig, build_gateway
from tckit.store import Store
from tckit.toydata import write_toy_inputs


def main() -> None:
    workdir = Path(sys.argv[1] if len(sys.argv) > 1 else "mock_run")
    started = time.perf_counter()
    inputs = write_toy_inputs(workdir / "inputs")

    config = PipelineConfig()
    config.store = str(workdir / "store")
    store = Store(config.store)
    gateway = build_gateway(config)

    print("ingest :", pipeline.stage_ingest(
        store, inputs["parsed_dir"], topics_path=inputs["topics_path"],
        qrels_path=inputs["qrels_path"]))
    print("chunk  :", pipeline.stage_chunk(store, config.chunk.size,
                                           config.chunk.overlap))
    print("index  :", pipeline.stage_index(store, config, gateway))
    print("pool   :", pipeline.stage_pool(store, config, gateway))
    print("assess :", pipeline.stage_assess(store, config, gateway))
    print("rag run:", pipeline.stage_rag_run(store, config, gateway))
    print("scored :", pipeline.stage_rag_score(store, config, gateway))
    elo_report = pipeline.stage_elo(store, config, gateway)
    print("elo    :", json.dumps(elo_report["configs"], indent=2))
    pipeline.append_ledger(store, gateway)
    report = pipeline.stage_report(store, config)
    print("report :", sorted(report))
    print(f"done in {time.perf_counter() - started:.1f}s -> {store.root}")


if __name__ == "__main__":
    main()
