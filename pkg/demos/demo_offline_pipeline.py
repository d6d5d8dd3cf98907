"""Walk the whole report pipeline offline, stage by stage.

Builds a small synthetic case-law corpus, indexes it with the
deterministic mock providers, retrieves a diverse hit set, clusters the
hits into an outline, generates cited section content, and renders the
final report. No network, no API keys.

Run:  python demos/demo_offline_pipeline.py
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from caselawgen.clustering import ClusterParams
from caselawgen.contentgen import GenParams
from caselawgen.corpus import Corpus
from caselawgen.indexer import build_index
from caselawgen.outline import serialize_toc
from caselawgen.pipeline import build_outline, generate_sections, make_providers
from caselawgen.report import assemble, render_markdown
from caselawgen.retrieval import RetrievalParams, search

TOPICS = {
    "detention": ["detention", "custody", "arrest", "remand", "liberty", "bail"],
    "privacy": ["privacy", "correspondence", "surveillance", "home", "interception", "telephone"],
    "expression": ["expression", "journalist", "press", "censorship", "publication", "satire"],
}


def build_demo_corpus(path: Path) -> Path:
    """Three topics, four judgments each, eight paragraphs per judgment."""
    lines = []
    j = 0
    for topic, vocab in TOPICS.items():
        for _ in range(4):
            paragraphs = []
            for p in range(1, 9):
                words = [vocab[(p + i) % len(vocab)] for i in range(3)]
                paragraphs.append({
                    "number": p,
                    "text": (
                        f"The court recalls that {words[0]} and {words[1]} require "
                        f"careful scrutiny of {words[2]} in case{j:02d} ground{j:02d}x{p}."
                    ),
                })
            lines.append(json.dumps({
                "item_id": f"001-5{j:04d}",
                "case_name": f"{topic.title()} Applicant v. Exampleland {j}",
                "date": f"20{10 + j % 10}-06-15",
                "paragraphs": paragraphs,
            }))
            j += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def main() -> None:
    with tempfile.TemporaryDirectory() as d:
        corpus_path = build_demo_corpus(Path(d) / "corpus.jsonl")

        print("== 1. ingest ==")
        corpus = Corpus()
        stats = corpus.ingest(corpus_path)
        print(f"loaded {stats.judgment_count} judgments / {stats.paragraph_count} paragraphs\n")

        print("== 2. keyphrase indexing (mock providers) ==")
        chat, embedder = make_providers(corpus, mock=True)
        index = build_index(corpus, embedder, chat, mode="keyphrase", batch_size=4)
        sample = index.records[0]
        print(f"{len(index)} records at dimension {index.dimension}")
        print(f"e.g. {sample.ref} indexed as: {sample.indexed_text!r}\n")

        print("== 3. diverse retrieval ==")
        query = "detention custody privacy surveillance expression press"
        params = RetrievalParams(k=40, fetch_k=80, lambda_=0.5, sim_threshold=0.15)
        hits = search(index, query, params, embedder)
        print(f"query: {query!r}")
        print(f"{len(hits)} hits; top 5:")
        for hit in hits[:5]:
            print(f"  {hit.rank:2d} {hit.query_similarity:+.3f} {hit.ref}")
        print()

        print("== 4. outline from hierarchical clustering ==")
        outline = build_outline(hits, index, corpus, chat, cluster_params=ClusterParams(min_cluster_size=5))
        print(serialize_toc(outline))
        print()

        print("== 5. grounded section generation ==")
        drafts = generate_sections(
            outline, index, corpus, chat, embedder, gen_params=GenParams(per_section_m=12, batch_size=6)
        )
        for node_id, draft in drafts.items():
            print(f"leaf {node_id}: {len(draft.citations)} citations, {len(draft.unresolved)} unresolved")
        print()

        print("== 6. rendered report (first 40 lines) ==")
        report = assemble(outline, drafts, query=query)
        for line in render_markdown(report).splitlines()[:40]:
            print(line)


if __name__ == "__main__":
    main()
