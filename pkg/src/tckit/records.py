"""Record types for the collection store.

Every record is an immutable value with a flat JSON representation; the
store persists one JSON object per line. ``validate()`` enforces the
per-record invariants and raises :class:`ValidationError` naming the
offending field. Cross-record invariants (foreign keys, run coherence)
are enforced by the store at write time.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from .errors import ValidationError

MODALITIES = frozenset({"document", "passage", "table"})

# Allowed relevance levels per qrel source. Imported labels follow the
# 3-point document scale of legacy collections; synthetic/human/majority
# use the 4-level scale; surrogate labels are binary.
QREL_SCALES: dict[str, frozenset[int]] = {
    "imported": frozenset({0, 1, 2}),
    "synthetic": frozenset({0, 1, 2, 3}),
    "human": frozenset({0, 1, 2, 3}),
    "surrogate": frozenset({0, 1}),
    "majority": frozenset({0, 1, 2, 3}),
}

RESOLUTION_PROVIDERS = frozenset({"openalex", "unpaywall", "publisher", "manual"})

TABLE_PARSE_VERDICTS = ("perfect", "good", "ok", "bad", "misclassified")
CAPTION_PARSE_VERDICTS = ("perfect", "not_recognized", "other")
AUDIT_KINDS: dict[str, tuple[str, ...]] = {
    "table_parse": TABLE_PARSE_VERDICTS,
    "caption_parse": CAPTION_PARSE_VERDICTS,
}

RELEVANCE_LEVELS = (0, 1, 2, 3)
RELEVANCE_LEVEL_NAMES = {
    0: "Irrelevant",
    1: "Related",
    2: "Highly relevant",
    3: "Perfectly relevant",
}


def _require(condition: bool, field_name: str, message: str) -> None:
    if not condition:
        raise ValidationError(f"{field_name}: {message}")


@dataclass(frozen=True)
class Document:
    doc_id: str
    doi: str | None = None
    title: str | None = None
    full_text: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    pdf_blob_ref: str | None = None

    def validate(self) -> None:
        _require(bool(self.doc_id), "doc_id", "must be nonempty")
        if self.full_text is not None:
            _require(len(self.full_text) > 0, "full_text", "present but empty")


@dataclass(frozen=True)
class TableArtifact:
    table_id: str
    doc_id: str
    cells: tuple[tuple[str, ...], ...]
    n_rows: int
    n_cols: int
    caption: str | None = None
    label: str | None = None
    intext_refs: tuple[str, ...] = ()
    page_hint: int | None = None

    @classmethod
    def from_grid(cls, table_id: str, doc_id: str, grid, **kwargs) -> "TableArtifact":
        """Build an artifact from a row-major grid, deriving the counts."""
        cells = tuple(tuple(str(c) for c in row) for row in grid)
        n_rows = len(cells)
        n_cols = len(cells[0]) if cells else 0
        return cls(table_id=table_id, doc_id=doc_id, cells=cells,
                   n_rows=n_rows, n_cols=n_cols, **kwargs)

    def validate(self) -> None:
        _require(bool(self.table_id), "table_id", "must be nonempty")
        _require(bool(self.doc_id), "doc_id", "must be nonempty")
        _require(len(self.cells) == self.n_rows, "n_rows", "does not match grid")
        for i, row in enumerate(self.cells):
            _require(len(row) == self.n_cols, "cells",
                     f"row {i} has {len(row)} entries, expected n_cols={self.n_cols}")

    def flattened_text(self) -> str:
        """Row-major cell contents joined with ' | ' separators."""
        return " | ".join(cell for row in self.cells for cell in row)

    def index_text(self) -> str:
        """Retrieval text: caption, flattened cells, then in-text references."""
        parts = [self.caption or "", self.flattened_text(), *self.intext_refs]
        return " ".join(p for p in parts if p)

    def render(self) -> str:
        """Structured text for prompts: caption, grid rows, reference notes."""
        lines = []
        if self.caption:
            lines.append(self.caption)
        lines.extend(" | ".join(row) for row in self.cells)
        lines.extend(f"[ref] {ref}" for ref in self.intext_refs)
        return "\n".join(lines)


@dataclass(frozen=True)
class FigureArtifact:
    figure_id: str
    doc_id: str
    caption: str | None = None
    image_blob_ref: str | None = None

    def validate(self) -> None:
        _require(bool(self.figure_id), "figure_id", "must be nonempty")
        _require(bool(self.doc_id), "doc_id", "must be nonempty")


@dataclass(frozen=True)
class Passage:
    passage_id: str
    doc_id: str
    char_start: int
    char_end: int
    text: str

    def validate(self) -> None:
        _require(bool(self.passage_id), "passage_id", "must be nonempty")
        _require(bool(self.doc_id), "doc_id", "must be nonempty")
        _require(0 <= self.char_start < self.char_end, "char_start",
                 f"need 0 <= char_start < char_end, got [{self.char_start}, {self.char_end})")
        _require(len(self.text) == self.char_end - self.char_start, "text",
                 "length does not match the [char_start, char_end) span")

    def validate_against(self, full_text: str) -> None:
        self.validate()
        _require(self.char_end <= len(full_text), "char_end",
                 f"beyond full_text length {len(full_text)}")
        _require(full_text[self.char_start:self.char_end] == self.text, "text",
                 "does not equal the full_text substring at its offsets")


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str
    description: str | None = None
    narrative: str | None = None

    def validate(self) -> None:
        _require(bool(self.topic_id), "topic_id", "must be nonempty")
        _require(bool(self.title), "title", "must be nonempty")

    def query_text(self) -> str:
        """Retrieval query: title plus description when present."""
        if self.description:
            return f"{self.title} {self.description}"
        return self.title


@dataclass(frozen=True)
class Qrel:
    topic_id: str
    item_id: str
    modality: str
    level: int
    source: str

    def validate(self) -> None:
        _require(bool(self.topic_id), "topic_id", "must be nonempty")
        _require(bool(self.item_id), "item_id", "must be nonempty")
        _require(self.modality in MODALITIES, "modality",
                 f"unknown modality {self.modality!r}")
        _require(self.source in QREL_SCALES, "source",
                 f"unknown source {self.source!r}")
        _require(self.level in QREL_SCALES[self.source], "level",
                 f"{self.level} outside the {self.source} scale")


@dataclass(frozen=True)
class RunEntry:
    topic_id: str
    item_id: str
    modality: str
    rank: int
    score: float
    run_tag: str

    def validate(self) -> None:
        _require(bool(self.run_tag), "run_tag", "must be nonempty")
        _require(self.modality in MODALITIES, "modality",
                 f"unknown modality {self.modality!r}")
        _require(self.rank >= 1, "rank", "must be >= 1")


@dataclass(frozen=True)
class Judgment:
    topic_id: str
    item_id: str
    modality: str
    level: int | None
    judge: str
    raw_response: str | None = None
    error: str | None = None

    def validate(self) -> None:
        _require(bool(self.judge), "judge", "must be nonempty")
        _require(self.modality in MODALITIES, "modality",
                 f"unknown modality {self.modality!r}")
        if self.level is None:
            _require(self.error is not None, "level",
                     "absent level requires an error flag")
        else:
            _require(self.level in RELEVANCE_LEVELS, "level",
                     f"{self.level} not in 0..3")


@dataclass(frozen=True)
class AuditLabel:
    item_id: str
    kind: str
    verdict: str
    annotator: str

    def validate(self) -> None:
        _require(self.kind in AUDIT_KINDS, "kind", f"unknown audit kind {self.kind!r}")
        _require(self.verdict in AUDIT_KINDS[self.kind], "verdict",
                 f"{self.verdict!r} not allowed for {self.kind}")
        _require(bool(self.annotator), "annotator", "must be nonempty")


@dataclass(frozen=True)
class QueryVariantSet:
    topic_id: str
    original_query: str
    variants: tuple[str, ...]

    def validate(self) -> None:
        _require(len(self.variants) >= 1, "variants", "must be nonempty")
        _require(all(v.strip() for v in self.variants), "variants",
                 "contains an empty variant")
        _require(len(set(self.variants)) == len(self.variants), "variants",
                 "contains duplicates")


@dataclass(frozen=True)
class RagAnswer:
    answer_id: str
    topic_id: str
    config_tag: str
    sample_index: int
    text: str
    token_count: int

    def validate(self) -> None:
        _require(bool(self.answer_id), "answer_id", "must be nonempty")
        _require(bool(self.text), "text", "must be nonempty")
        _require(self.token_count >= 1, "token_count", "must be >= 1")
        _require(self.sample_index >= 1, "sample_index", "must be >= 1")


@dataclass(frozen=True)
class PairJudgment:
    topic_id: str
    answer_a: str
    answer_b: str
    winner: str
    judge: str
    criteria_notes: str | None = None

    def validate(self) -> None:
        _require(self.answer_a != self.answer_b, "answer_b",
                 "pair members must differ")
        _require(self.winner in ("a", "b"), "winner", "must be 'a' or 'b'")
        _require(bool(self.judge), "judge", "must be nonempty")


@dataclass(frozen=True)
class RagasScores:
    answer_id: str
    context_relevance: float
    faithfulness: float
    answer_relevance: float
    precision_at_k: float
    recall: float | None
    extracted_sentences: int
    total_sentences: int
    supported_statements: int
    total_statements: int
    question_sims: tuple[float, ...]
    degenerate_answer: bool = False

    def validate(self) -> None:
        for name in ("context_relevance", "faithfulness", "answer_relevance",
                     "precision_at_k"):
            value = getattr(self, name)
            _require(0.0 <= value <= 1.0, name, f"{value} outside [0, 1]")
        if self.recall is not None:
            _require(0.0 <= self.recall <= 1.0, "recall",
                     f"{self.recall} outside [0, 1]")


@dataclass(frozen=True)
class ResolutionResult:
    doi: str
    candidate_urls: tuple[str, ...]
    provider: str | None
    resolved_at: str
    error: str | None = None

    def validate(self) -> None:
        _require(bool(self.doi), "doi", "must be nonempty")
        if self.provider is not None:
            _require(self.provider in RESOLUTION_PROVIDERS, "provider",
                     f"unknown provider {self.provider!r}")
        for url in self.candidate_urls:
            _require(url.startswith(("http://", "https://")), "candidate_urls",
                     f"not a valid URL: {url!r}")


def to_dict(record) -> dict:
    """JSON-ready dict for any record dataclass."""
    return asdict(record)


def from_dict(cls, data: dict):
    """Rebuild a record from its JSON dict, coercing lists back to tuples."""
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if isinstance(value, list):
            if value and isinstance(value[0], list):
                value = tuple(tuple(v) for v in value)
            else:
                value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)
