"""Topical case-law report engine.

Turns a user query over a paragraph-segmented case-law corpus into a
structured, citation-linked report: diverse retrieval (MMR), hierarchical
density clustering, LLM outline labeling and reorganization, grounded
per-section generation, and an LLM-judge evaluation harness.
"""

__version__ = "0.1.0"

from .corpus import Corpus, Judgment, Paragraph, ParagraphRef
from .retrieval import RetrievalParams, search
from .outline import Outline, OutlineNode, parse_toc, serialize_toc

__all__ = [
    "Corpus",
    "Judgment",
    "Paragraph",
    "ParagraphRef",
    "RetrievalParams",
    "search",
    "Outline",
    "OutlineNode",
    "parse_toc",
    "serialize_toc",
]
