"""Fixed-size overlapping passage chunking.

Texts are split in character (code point) space with a fixed window and
overlap, the configuration retrieval and RAG both build on. Chunk starts
advance by ``size - overlap``; the final chunk may be shorter.
"""

from __future__ import annotations

from .errors import ConfigError
from .records import Passage

DEFAULT_CHUNK_SIZE = 512
DEFAULT_CHUNK_OVERLAP = 100


def chunk_text(doc_id: str, text: str, size: int = DEFAULT_CHUNK_SIZE,
               overlap: int = DEFAULT_CHUNK_OVERLAP) -> list[Passage]:
    """Split ``text`` into overlapping passages.

    Starts are 0, size-overlap, 2(size-overlap), ...; each chunk spans
    min(size, remaining) characters; generation stops once a chunk has
    reached the end of the text. Passage ids are ``doc_id#ordinal``.
    """
    if overlap < 0:
        raise ConfigError(f"overlap must be >= 0, got {overlap}")
    if size <= overlap:
        raise ConfigError(f"size must exceed overlap, got size={size} overlap={overlap}")
    passages = []
    stride = size - overlap
    start = 0
    n = len(text)
    while start < n:
        end = min(start + size, n)
        passages.append(Passage(
            passage_id=f"{doc_id}#{len(passages)}",
            doc_id=doc_id,
            char_start=start,
            char_end=end,
            text=text[start:end],
        ))
        if end >= n:
            break
        start += stride
    return passages
