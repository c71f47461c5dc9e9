"""Structured-parse ingestion, caption linking, and parse-quality audits.

The upstream PDF parser is out of scope; this module ingests its output
as a ``ParsedDocument`` (an ordered list of typed blocks), assembles the
full text, links captions to tables, locates in-text table references,
flags obvious misclassifications, and supports sampled manual audits.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from random import Random

from .errors import ValidationError
from .records import (AUDIT_KINDS, Document, FigureArtifact, TableArtifact,
                      from_dict, to_dict)
from .store import Store

BLOCK_KINDS = frozenset(
    {"paragraph", "heading", "table", "figure", "caption", "other"})

CAPTION_PATTERN = re.compile(r"^(Table|TABLE|Tab\.)\s+\S+")
CAPTION_DISTANCE = 2
REFERENCE_WINDOW = 300

_BIB_CELL = re.compile(r"^\[\d+\]")
EMPTY_CELL_FLAG_RATIO = 0.8
BIB_CELL_FLAG_COUNT = 3


@dataclass(frozen=True)
class Block:
    kind: str
    text: str | None = None
    grid: tuple[tuple[str, ...], ...] | None = None
    page: int | None = None

    def validate(self) -> None:
        if self.kind not in BLOCK_KINDS:
            raise ValidationError(f"kind: unknown block kind {self.kind!r}")
        if self.kind == "table" and self.grid is None:
            raise ValidationError("grid: table block without a grid")
        if self.kind in ("paragraph", "heading", "caption") and self.text is None:
            raise ValidationError(f"text: {self.kind} block without text")


@dataclass(frozen=True)
class ParsedDocument:
    doc_id: str
    blocks: tuple[Block, ...]
    doi: str | None = None
    title: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.doc_id:
            raise ValidationError("doc_id: must be nonempty")
        for block in self.blocks:
            block.validate()

    @classmethod
    def from_json(cls, data: dict) -> "ParsedDocument":
        blocks = tuple(from_dict(Block, b) for b in data.get("blocks", []))
        parse = cls(doc_id=data["doc_id"], blocks=blocks,
                    doi=data.get("doi"), title=data.get("title"),
                    metadata=data.get("metadata", {}))
        parse.validate()
        return parse

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "doi": self.doi, "title": self.title,
                "metadata": self.metadata,
                "blocks": [to_dict(b) for b in self.blocks]}


@dataclass(frozen=True)
class IngestResult:
    document: Document
    tables: tuple[TableArtifact, ...]
    figures: tuple[FigureArtifact, ...]


def assemble_full_text(parse: ParsedDocument) -> str:
    """Paragraph and heading texts in reading order, blank-line separated."""
    texts = [b.text for b in parse.blocks
             if b.kind in ("paragraph", "heading") and b.text]
    return "\n\n".join(texts)


def ingest_parsed_document(store: Store, parse: ParsedDocument) -> IngestResult:
    """Persist the document plus one artifact per table/figure block.

    An empty parse yields a document without full text and no artifacts.
    Re-ingesting a doc_id overwrites per the store's last-write-wins rule.
    """
    parse.validate()
    full_text = assemble_full_text(parse)
    document = Document(doc_id=parse.doc_id, doi=parse.doi, title=parse.title,
                        full_text=full_text or None, metadata=dict(parse.metadata))
    tables = []
    figures = []
    for block in parse.blocks:
        if block.kind == "table":
            tables.append(TableArtifact.from_grid(
                table_id=f"{parse.doc_id}/t{len(tables)}",
                doc_id=parse.doc_id, grid=block.grid, page_hint=block.page))
        elif block.kind == "figure":
            figures.append(FigureArtifact(
                figure_id=f"{parse.doc_id}/f{len(figures)}",
                doc_id=parse.doc_id, caption=block.text))
    store.upsert([document, *tables, *figures])
    return IngestResult(document=document, tables=tuple(tables),
                        figures=tuple(figures))


def link_caption(parse: ParsedDocument,
                 max_distance: int = CAPTION_DISTANCE) -> dict[int, int | None]:
    """Assign each table block its nearest caption-patterned block.

    Candidates are caption blocks within ``max_distance`` block positions
    whose text opens like a table caption. Assignment is greedy by
    (distance, table position, caption position): when two tables compete
    for one caption the nearer table wins, and on an exact distance tie
    the earlier table wins. Returns table block index -> caption block
    index (or None).
    """
    table_idx = [i for i, b in enumerate(parse.blocks) if b.kind == "table"]
    caption_idx = [i for i, b in enumerate(parse.blocks)
                   if b.kind == "caption" and b.text
                   and CAPTION_PATTERN.match(b.text)]
    candidates = []
    for t in table_idx:
        for c in caption_idx:
            distance = abs(t - c)
            if distance <= max_distance:
                candidates.append((distance, t, c))
    candidates.sort()
    assigned: dict[int, int | None] = {t: None for t in table_idx}
    used_captions: set[int] = set()
    for _, t, c in candidates:
        if assigned[t] is None and c not in used_captions:
            assigned[t] = c
            used_captions.add(c)
    return assigned


def extract_table_label(caption: str | None) -> str | None:
    """Leading table designator normalized to "Table <id>"; None when absent.

    Arabic and roman identifiers are both accepted; the identifier is kept
    verbatim apart from stripping trailing punctuation.
    """
    if not caption:
        return None
    m = re.match(r"(?:Table|TABLE|Tab\.)\s+(\S+)", caption)
    if not m:
        return None
    ident = m.group(1).rstrip(".,:;!?")
    if not ident:
        return None
    return f"Table {ident}"


def find_intext_references(full_text: str, label: str,
                           window: int = REFERENCE_WINDOW,
                           caption: str | None = None) -> list[str]:
    """Snippets around every mention of the table label in the running text.

    Matches are case-insensitive and word-boundary delimited ("Table 2"
    does not match "Table 21"). Any occurrence inside the caption's own
    text is excluded. Each match yields up to ``window`` characters
    centered on it; overlapping snippets merge, returned in document order.
    """
    if not label:
        return []
    pattern = re.compile(
        r"(?<![A-Za-z0-9])" + re.escape(label) + r"(?![A-Za-z0-9])",
        re.IGNORECASE)
    exclude: list[tuple[int, int]] = []
    if caption:
        start = 0
        while True:
            pos = full_text.find(caption, start)
            if pos < 0:
                break
            exclude.append((pos, pos + len(caption)))
            start = pos + 1

    spans = []
    n = len(full_text)
    for m in pattern.finditer(full_text):
        if any(s < m.end() and m.start() < e for s, e in exclude):
            continue
        mid = (m.start() + m.end()) // 2
        start = max(0, mid - window // 2)
        end = min(n, start + window)
        # windows never reach into the caption's own span
        for xs, xe in exclude:
            if xe <= m.start():
                start = max(start, xe)
            if xs >= m.end():
                end = min(end, xs)
        spans.append((start, end))

    merged: list[list[int]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [full_text[s:e] for s, e in merged]


def filter_misclassified(table: TableArtifact) -> str:
    """'flag' for grids that look like parser misclassifications, else 'keep'.

    Flagged: 1x1 grids, grids at least 80% empty, and bibliography-shaped
    grids (3+ cells starting with "[n]"). Flagging never deletes; flagged
    tables are only excluded from pooling.
    """
    if table.n_rows == 1 and table.n_cols == 1:
        return "flag"
    cells = [cell for row in table.cells for cell in row]
    if cells:
        empty = sum(1 for c in cells if not c.strip())
        if empty / len(cells) >= EMPTY_CELL_FLAG_RATIO:
            return "flag"
    if sum(1 for c in cells if _BIB_CELL.match(c.strip())) >= BIB_CELL_FLAG_COUNT:
        return "flag"
    return "keep"


def enrich_tables(store: Store, parse: ParsedDocument,
                  max_distance: int = CAPTION_DISTANCE,
                  window: int = REFERENCE_WINDOW) -> list[TableArtifact]:
    """Run the full table-context flow for one ingested parse.

    Links captions, extracts labels, collects in-text reference snippets,
    and re-persists the enriched artifacts.
    """
    assignment = link_caption(parse, max_distance=max_distance)
    full_text = assemble_full_text(parse)
    table_blocks = [i for i, b in enumerate(parse.blocks) if b.kind == "table"]
    enriched = []
    for ordinal, block_idx in enumerate(table_blocks):
        table = store.get_table(f"{parse.doc_id}/t{ordinal}")
        if table is None:
            continue
        caption_idx = assignment.get(block_idx)
        caption = parse.blocks[caption_idx].text if caption_idx is not None else None
        label = extract_table_label(caption)
        refs: tuple[str, ...] = ()
        if label:
            refs = tuple(find_intext_references(full_text, label,
                                                window=window, caption=caption))
        enriched.append(TableArtifact(
            table_id=table.table_id, doc_id=table.doc_id, cells=table.cells,
            n_rows=table.n_rows, n_cols=table.n_cols, caption=caption,
            label=label, intext_refs=refs, page_hint=table.page_hint))
    if enriched:
        store.upsert(enriched)
    return enriched


def ingest_and_enrich(store: Store, parse: ParsedDocument,
                      max_distance: int = CAPTION_DISTANCE,
                      window: int = REFERENCE_WINDOW) -> IngestResult:
    result = ingest_parsed_document(store, parse)
    tables = enrich_tables(store, parse, max_distance=max_distance,
                           window=window)
    return IngestResult(document=result.document, tables=tuple(tables),
                        figures=result.figures)


def load_parsed_document(path) -> ParsedDocument:
    with open(path, encoding="utf-8") as fh:
        return ParsedDocument.from_json(json.load(fh))


# ----------------------------------------------------------------------
# parse-quality audits

def audit_population(store: Store, kind: str) -> list[str]:
    if kind == "table_parse":
        return [t.table_id for t in store.tables()]
    if kind == "caption_parse":
        return [t.table_id for t in store.tables() if t.caption]
    raise ValidationError(f"kind: unknown audit kind {kind!r}")


def sample_for_audit(store: Store, kind: str, n: int, seed: int) -> list[str]:
    """Uniform sample without replacement, deterministic for a fixed seed."""
    population = sorted(audit_population(store, kind))
    if n > len(population):
        raise ValidationError(
            f"n: sample size {n} exceeds population {len(population)}")
    return Random(str(seed)).sample(population, n)


def summarize_audit(store: Store, kind: str,
                    counts: dict[str, int] | None = None) -> dict:
    """Verdict histogram with percentages over all labeled items.

    ``counts`` can be passed directly to summarize an external tally;
    otherwise the store's audit labels for ``kind`` are counted.
    """
    if kind not in AUDIT_KINDS:
        raise ValidationError(f"kind: unknown audit kind {kind!r}")
    if counts is None:
        counts = {}
        for label in store.audit_labels(kind=kind):
            counts[label.verdict] = counts.get(label.verdict, 0) + 1
    total = sum(counts.values())
    percent = {verdict: round(100.0 * count / total, 2)
               for verdict, count in counts.items()} if total else {}
    return {"kind": kind, "total": total, "counts": dict(counts),
            "percent": percent}
