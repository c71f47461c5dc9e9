#!/usr/bin/env python3
"""Convert Docling document JSON exports into the ingestion format.

Usage: python scripts/convert_docling_parse.py in_dir_or_file out_dir

Docling's `export_to_dict()` output carries text items, tables, and
pictures plus a body tree that fixes reading order. This adapter maps
that shape onto the parsed-document JSON the `tckit ingest` command
reads (doc_id + ordered blocks). It is a standalone convenience script:
the toolkit itself has no dependency on any particular parser, and any
producer of the block schema works equally well.

Mapping:
  section_header / title           -> heading
  text / paragraph / list_item ... -> paragraph
  caption                          -> caption
  tables (data.grid cell text)     -> table
  pictures                         -> figure (caption text when present)
Reading order follows body.children $refs when present, otherwise the
listed order of texts then tables then pictures.
"""

import json
import sys
from pathlib import Path

_HEADING_LABELS = {"section_header", "title", "page_header"}
_PARAGRAPH_LABELS = {"text", "paragraph", "list_item", "footnote", "formula",
                     "code"}


def _page_of(item) -> int | None:
    prov = item.get("prov") or []
    if prov and isinstance(prov[0], dict):
        return prov[0].get("page_no")
    return None


def _grid_of(table_item) -> list[list[str]]:
    data = table_item.get("data") or {}
    grid = data.get("grid")
    if grid:
        return [[(cell or {}).get("text", "") for cell in row] for row in grid]
    # fall back to flat cell lists with row/col indices
    cells = data.get("table_cells") or []
    if not cells:
        return [[""]]
    n_rows = 1 + max(c.get("start_row_offset_idx", 0) for c in cells)
    n_cols = 1 + max(c.get("start_col_offset_idx", 0) for c in cells)
    out = [["" for _ in range(n_cols)] for _ in range(n_rows)]
    for cell in cells:
        r = cell.get("start_row_offset_idx", 0)
        c = cell.get("start_col_offset_idx", 0)
        out[r][c] = cell.get("text", "")
    return out


def _caption_text(item, resolve) -> str | None:
    for ref in item.get("captions") or []:
        target = resolve((ref or {}).get("$ref", ""))
        if target and target.get("text"):
            return target["text"]
    return None


def convert(docling: dict, doc_id: str | None = None) -> dict:
    """One Docling export dict -> parsed-document JSON dict."""
    texts = docling.get("texts") or []
    tables = docling.get("tables") or []
    pictures = docling.get("pictures") or []

    def resolve(ref: str):
        try:
            kind, idx = ref.lstrip("#/").split("/")
            pool = {"texts": texts, "tables": tables,
                    "pictures": pictures}.get(kind)
            return pool[int(idx)] if pool is not None else None
        except (ValueError, IndexError):
            return None

    ordered: list[tuple[str, dict]] = []
    children = (docling.get("body") or {}).get("children") or []
    if children:
        for child in children:
            ref = (child or {}).get("$ref", "")
            item = resolve(ref)
            if item is not None:
                ordered.append((ref.lstrip("#/").split("/")[0], item))
    else:
        ordered = [("texts", t) for t in texts]
        ordered += [("tables", t) for t in tables]
        ordered += [("pictures", p) for p in pictures]

    blocks = []
    for kind, item in ordered:
        if kind == "texts":
            label = item.get("label", "text")
            text = item.get("text", "")
            if label in _HEADING_LABELS:
                block_kind = "heading"
            elif label == "caption":
                block_kind = "caption"
            elif label in _PARAGRAPH_LABELS:
                block_kind = "paragraph"
            else:
                block_kind = "other"
            blocks.append({"kind": block_kind, "text": text,
                           "grid": None, "page": _page_of(item)})
        elif kind == "tables":
            blocks.append({"kind": "table", "text": None,
                           "grid": _grid_of(item), "page": _page_of(item)})
            caption = _caption_text(item, resolve)
            if caption:
                blocks.append({"kind": "caption", "text": caption,
                               "grid": None, "page": _page_of(item)})
        elif kind == "pictures":
            blocks.append({"kind": "figure",
                           "text": _caption_text(item, resolve),
                           "grid": None, "page": _page_of(item)})

    origin = docling.get("origin") or {}
    return {
        "doc_id": doc_id or docling.get("name") or origin.get("filename", "doc"),
        "doi": None,
        "title": docling.get("name"),
        "metadata": {},
        "blocks": blocks,
    }


def main() -> None:
    if len(sys.argv) != 3:
        print(__doc__)
        sys.exit(2)
    source = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(source.glob("*.json")) if source.is_dir() else [source]
    for path in paths:
        converted = convert(json.loads(path.read_text(encoding="utf-8")),
                            doc_id=path.stem)
        target = out_dir / f"{converted['doc_id']}.json"
        target.write_text(json.dumps(converted, ensure_ascii=False, indent=1),
                          encoding="utf-8")
        print(f"{path} -> {target} ({len(converted['blocks'])} blocks)")


if __name__ == "__main__":
    main()
