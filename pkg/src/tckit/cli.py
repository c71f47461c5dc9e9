"""Command-line entry point.

Subcommands mirror the pipeline stages: acquire -> ingest -> chunk ->
index -> pool -> assess -> agree -> rag -> elo -> serve -> report. Every
stage is idempotent (re-runs skip existing outputs unless --force) and a
missing upstream artifact exits with code 3 and a machine-readable error.
"""

from __future__ import annotations

import fnmatch
import json
import sys
from dataclasses import asdict

import click

from . import pipeline
from .agreement import judgments_by_rater, mean_pairwise_kappa
from .config import build_gateway, load_config
from .errors import TckitError
from .store import Store


def _fail_stage(exc: pipeline.StageError) -> None:
    click.echo(json.dumps({"error": str(exc), "missing": exc.missing_stage}),
               err=True)
    sys.exit(3)


def _run_stage(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except pipeline.StageError as exc:
        _fail_stage(exc)
    except TckitError as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="YAML or JSON config file.")
@click.pass_context
def main(ctx, config_path):
    ctx.obj = load_config(config_path)


@main.command()
@click.option("--dois", "dois_path", type=click.Path(exists=True), required=True,
              help="File with one DOI per line.")
@click.pass_obj
def acquire(config, dois_path):
    """Resolve DOIs to open-access PDF URLs and download the PDFs."""
    from .acquisition import AcquisitionConfig, fetch_pdfs, resolve_pdf_urls

    store = Store(config.store)
    with open(dois_path, encoding="utf-8") as fh:
        dois = [line.strip() for line in fh if line.strip()]
    acq = AcquisitionConfig(providers=config.acquisition.providers,
                            email=config.acquisition.email,
                            publisher_url_template=config.acquisition.publisher_url_template,
                            concurrency=config.acquisition.concurrency)
    results = resolve_pdf_urls(dois, acq)
    report = fetch_pdfs(results, store)
    click.echo(json.dumps({"resolved": sum(1 for r in results if r.candidate_urls),
                           "attempted": report.attempted,
                           "succeeded": report.succeeded,
                           "failed": report.failed,
                           "skipped": report.skipped}))


@main.command()
@click.option("--parsed", "parsed_dir", type=click.Path(exists=True),
              required=True, help="Directory of parsed-document JSON files.")
@click.option("--topics", "topics_path", type=click.Path(exists=True),
              default=None, help="Topics JSONL file.")
@click.option("--qrels", "qrels_path", type=click.Path(exists=True),
              default=None, help="TREC qrels file (document level).")
@click.option("--qrels-modality", default="document", show_default=True)
@click.pass_obj
def ingest(config, parsed_dir, topics_path, qrels_path, qrels_modality):
    """Ingest parsed documents; link captions and in-text references."""
    store = Store(config.store)
    summary = _run_stage(pipeline.stage_ingest, store, parsed_dir,
                         topics_path=topics_path, qrels_path=qrels_path,
                         qrels_modality=qrels_modality)
    click.echo(json.dumps(summary))


@main.command()
@click.option("--size", type=int, default=None, help="Chunk size in characters.")
@click.option("--overlap", type=int, default=None, help="Chunk overlap in characters.")
@click.option("--force", is_flag=True)
@click.pass_obj
def chunk(config, size, overlap, force):
    """Split full texts into fixed-size overlapping passages."""
    store = Store(config.store)
    written = _run_stage(pipeline.stage_chunk, store,
                         size if size is not None else config.chunk.size,
                         overlap if overlap is not None else config.chunk.overlap,
                         force=force)
    click.echo(json.dumps({"passages": written}))


@main.command()
@click.option("--force", is_flag=True)
@click.pass_obj
def index(config, force):
    """Build BM25 and dense indexes for each modality."""
    store = Store(config.store)
    gateway = build_gateway(config)
    counts = _run_stage(pipeline.stage_index, store, config, gateway,
                        force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"indexed": counts}))


@main.command()
@click.option("--modality", type=click.Choice(["passage", "table", "both"]),
              default="both", show_default=True)
@click.option("--depth", type=int, default=None)
@click.option("--variants", "n_variants", type=int, default=None)
@click.option("--k-rrf", type=int, default=None)
@click.option("--force", is_flag=True)
@click.pass_obj
def pool(config, modality, depth, n_variants, k_rrf, force):
    """Fuse query-variant rankings from both retrievers into top-k pools."""
    if modality != "both":
        config.modalities = (modality,)
    if depth is not None:
        config.pool.depth = depth
    if n_variants is not None:
        config.pool.variants = n_variants
    if k_rrf is not None:
        config.pool.k_rrf = k_rrf
    store = Store(config.store)
    gateway = build_gateway(config)
    counts = _run_stage(pipeline.stage_pool, store, config, gateway,
                        force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"pooled": counts}))


@main.command()
@click.option("--models", default=None,
              help="Comma-separated judge model tags (default from config).")
@click.option("--modality", type=click.Choice(["passage", "table", "both"]),
              default="both", show_default=True)
@click.option("--force", is_flag=True)
@click.pass_obj
def assess(config, models, modality, force):
    """Assign 4-level relevance labels to pooled items."""
    store = Store(config.store)
    gateway = build_gateway(config)
    model_tags = models.split(",") if models else None
    modalities = None if modality == "both" else (modality,)
    written = _run_stage(pipeline.stage_assess, store, config, gateway,
                         models=model_tags, modalities=modalities, force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"judgments": written}))


@main.command()
@click.option("--a", "selector_a", required=True,
              help="Rater selector: comma-separated ids, globs allowed.")
@click.option("--b", "selector_b", required=True)
@click.option("--granularity", type=click.Choice(["four_level", "binary"]),
              default="four_level", show_default=True)
@click.pass_obj
def agree(config, selector_a, selector_b, granularity):
    """Mean pairwise Cohen's kappa between two rater groups."""
    store = Store(config.store)
    by_rater = judgments_by_rater(store.judgments())
    raters = sorted(by_rater)

    def select(selector: str) -> list[str]:
        chosen = []
        for pattern in selector.split(","):
            pattern = pattern.strip()
            chosen.extend(r for r in raters if fnmatch.fnmatch(r, pattern))
        return sorted(set(chosen))

    group_a, group_b = select(selector_a), select(selector_b)
    if not group_a or not group_b:
        click.echo(json.dumps({"error": "selector matched no raters",
                               "raters": raters}), err=True)
        sys.exit(1)
    summary = mean_pairwise_kappa(by_rater, group_a, group_b,
                                  granularity=granularity)
    click.echo(json.dumps({
        "granularity": summary.granularity,
        "mean_kappa": summary.mean_kappa,
        "pairs": [asdict(p) for p in summary.pairs],
        "skipped_pairs": [list(p) for p in summary.skipped_pairs]}))


@main.group()
def rag():
    """Generate and score retrieval-augmented answers."""


@rag.command("run")
@click.option("--force", is_flag=True)
@click.pass_obj
def rag_run(config, force):
    """Generate sampled answers for all six retrieval configurations."""
    store = Store(config.store)
    gateway = build_gateway(config)
    written = _run_stage(pipeline.stage_rag_run, store, config, gateway,
                         force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"answers": written}))


@rag.command("score")
@click.option("--force", is_flag=True)
@click.pass_obj
def rag_score(config, force):
    """Score answers: context relevance, faithfulness, answer relevance, P/R."""
    store = Store(config.store)
    gateway = build_gateway(config)
    written = _run_stage(pipeline.stage_rag_score, store, config, gateway,
                         force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"scored": written}))


@main.group()
def elo():
    """Pairwise answer comparison and Elo ranking."""


@elo.command("run")
@click.option("--k", type=float, default=None)
@click.option("--permutations", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True)
@click.pass_obj
def elo_run(config, k, permutations, seed, force):
    """Judge scheduled pairs and compute permutation-averaged Elo ratings."""
    store = Store(config.store)
    gateway = build_gateway(config)
    report = _run_stage(pipeline.stage_elo, store, config, gateway, k=k,
                        permutations=permutations, seed=seed, force=force)
    pipeline.append_ledger(store, gateway)
    click.echo(json.dumps({"judged_pairs": report["judged_pairs"],
                           "skipped_pairs": report["skipped_pairs"],
                           "configs": report["configs"]}))


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--annotators", default=None,
              help="Comma-separated annotator ids for task assignment.")
@click.pass_obj
def serve(config, host, port, annotators):
    """Serve the annotation API for the labeling UI."""
    import uvicorn

    from .service import build_audit_tasks, build_relevance_tasks, create_app

    store = Store(config.store)
    annotator_ids = (tuple(annotators.split(","))
                     if annotators else config.serve.annotators)
    tasks = _run_stage(build_relevance_tasks, store,
                       modalities=config.modalities,
                       top_n=config.serve.top_n, bottom_n=config.serve.bottom_n,
                       annotators=annotator_ids or None)
    if config.serve.audit_n > 0:
        from dataclasses import replace

        for kind in ("table_audit", "caption_audit"):
            extra = build_audit_tasks(store, kind, config.serve.audit_n,
                                      seed=config.serve.audit_seed)
            offset = len(tasks)
            tasks.extend(replace(t, index=offset + t.index) for t in extra)
    app = create_app(store, tasks, ui_origin=config.serve.ui_origin)
    uvicorn.run(app, host=host or config.serve.host,
                port=port or config.serve.port)


@main.command()
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the report to this path.")
@click.pass_obj
def report(config, out_path):
    """Consolidated JSON: counts, kappa tables, RAGAS means, Elo, costs."""
    store = Store(config.store)
    result = _run_stage(pipeline.stage_report, store, config)
    text = json.dumps(result, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
