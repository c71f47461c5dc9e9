"""tckit: test-collection enrichment, synthetic labeling, and RAG evaluation.

Pipeline stages: acquire PDFs from DOIs, ingest structured parses,
chunk, index, pool with reciprocal rank fusion, judge with 4-level
synthetic labels, measure agreement, run and score RAG configurations,
and rank answers with a permutation-averaged Elo tournament. A bundled
mock provider runs everything offline and deterministically.
"""

__version__ = "0.1.0"
