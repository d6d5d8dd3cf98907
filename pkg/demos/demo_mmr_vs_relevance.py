"""Show why diverse retrieval matters: near-duplicate flooding.

Five judgments carry an identical paragraph that matches the query
perfectly. Pure relevance ranking returns all five copies; MMR spends the
same budget on one copy plus distinct material.

Run:  python demos/demo_mmr_vs_relevance.py
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from caselawgen.corpus import Corpus
from caselawgen.indexer import build_index
from caselawgen.providers import MockEmbeddingProvider
from caselawgen.retrieval import RetrievalParams, search

DUP_TEXT = "Asylum deportation expulsion refoulement removal risk assessment required."
VOCAB = ["asylum", "deportation", "expulsion", "refoulement", "removal", "risk"]


def build_corpus(path: Path) -> Path:
    lines = []
    for j in range(5):
        lines.append(json.dumps({
            "item_id": f"dup-{j}",
            "case_name": f"Duplicate v. State {j}",
            "date": "2015-06-01",
            "paragraphs": [{"number": 1, "text": DUP_TEXT}],
        }))
    pairs = [(a, b) for a in range(len(VOCAB)) for b in range(a + 1, len(VOCAB))]
    for j, (a, b) in enumerate(pairs):
        text = f"{VOCAB[a]} {VOCAB[b]} theme{j:02d}a theme{j:02d}b theme{j:02d}c theme{j:02d}d."
        lines.append(json.dumps({
            "item_id": f"other-{j:02d}",
            "case_name": f"Distinct v. State {j}",
            "date": "2016-06-01",
            "paragraphs": [{"number": 1, "text": text}],
        }))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def main() -> None:
    with tempfile.TemporaryDirectory() as d:
        corpus = Corpus()
        corpus.ingest(build_corpus(Path(d) / "corpus.jsonl"))
        embedder = MockEmbeddingProvider()
        index = build_index(corpus, embedder, mode="paragraph")

        query = "asylum deportation expulsion refoulement removal risk"
        for mode in ("relevance", "mmr"):
            params = RetrievalParams(k=10, fetch_k=30, lambda_=0.5, mode=mode)
            hits = search(index, query, params, embedder)
            dupes = sum(1 for h in hits if h.ref.judgment_id.startswith("dup-"))
            print(f"-- {mode} mode: {dupes} duplicate(s) in top {len(hits)} --")
            for hit in hits:
                tag = "DUPLICATE" if hit.ref.judgment_id.startswith("dup-") else "distinct "
                print(f"  {hit.rank:2d} {hit.query_similarity:+.3f} {tag} {hit.ref}")
            print()


if __name__ == "__main__":
    main()
