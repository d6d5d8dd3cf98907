"""Stage orchestration shared by the CLI and the HTTP service.

Wires corpus, index, retrieval, clustering, outline, and content
generation together, and snapshots every parameter into the session so a
mock-provider re-run reproduces the report byte for byte.
"""
from __future__ import annotations

import datetime
import logging

from .clustering import ClusterParams, ClusterTree, cluster, representatives
from .contentgen import GenParams, SectionDraft, generate_section, retrieve_for_section, validate_citations
from .corpus import Corpus
from .errors import TooFewPoints
from .indexer import VectorIndex
from .outline import (
    Outline,
    TitledCluster,
    concat_fallback,
    label_cluster,
    parse_toc,
    path_query,
    reorganize,
)
from .providers import (
    ChatProvider,
    EmbeddingProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    MockChatProvider,
    MockEmbeddingProvider,
    ProviderConfig,
)
from .retrieval import ParagraphHit, RetrievalParams, search

logger = logging.getLogger(__name__)

MOCK_TIMESTAMP = "2000-01-01T00:00:00+00:00"
MOCK_DIMENSION = 256


def timestamp(mock: bool) -> str:
    # wall-clock time would break byte-reproducibility of mock runs
    if mock:
        return MOCK_TIMESTAMP
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def make_providers(
    corpus: Corpus,
    mock: bool = True,
    chat_config: ProviderConfig | None = None,
    embed_config: ProviderConfig | None = None,
    dimension: int = MOCK_DIMENSION,
) -> tuple[ChatProvider, EmbeddingProvider]:
    if mock:
        return MockChatProvider.from_corpus(corpus), MockEmbeddingProvider(dimension)
    if chat_config is None or embed_config is None:
        raise ValueError("real providers need chat and embedding configs")
    return HttpChatProvider(chat_config), HttpEmbeddingProvider(embed_config, dimension)


def run_retrieval(
    index: VectorIndex,
    query: str,
    params: RetrievalParams,
    embedder: EmbeddingProvider,
) -> list[ParagraphHit]:
    return search(index, query, params, embedder)


def _titled_clusters(
    hits: list[ParagraphHit],
    index: VectorIndex,
    corpus: Corpus,
    params: ClusterParams,
    chat: ChatProvider,
) -> tuple[list[TitledCluster], ClusterTree | None]:
    """Cluster the curated hits and label each selected cluster.

    Too few points, or a selection that comes back empty, falls back to a
    single cluster holding every hit.
    """
    vec_by_ref = {r.ref: r.vector for r in index.records}
    refs = [h.ref for h in hits]
    embeddings = [vec_by_ref[ref] for ref in refs]

    tree: ClusterTree | None = None
    groups: list[tuple[int, list[int], float]] = []  # (cluster_id, members, stability)
    try:
        _, tree = cluster(embeddings, params)
        for node in tree.selected():
            groups.append((node.node_id, list(node.members), node.stability))
    except TooFewPoints:
        logger.info("only %d hits; using a single cluster", len(hits))
    if not groups:
        groups = [(0, list(range(len(refs))), 0.0)]

    entries: list[TitledCluster] = []
    for cluster_id, members, stability in groups:
        rep_idx = representatives(embeddings, members, n=5)
        rep_paragraphs = [corpus.get_paragraph(refs[i]) for i in rep_idx]
        title = label_cluster(rep_paragraphs, chat)
        entries.append(TitledCluster(title=title, stability=stability, cluster_id=cluster_id))
    return entries, tree


def build_outline(
    hits: list[ParagraphHit],
    index: VectorIndex,
    corpus: Corpus,
    chat: ChatProvider,
    cluster_params: ClusterParams | None = None,
    reorganize_enabled: bool = True,
) -> Outline:
    """Clustering -> labeling -> reorganization (or the concat ablation)."""
    if not hits:
        raise ValueError("cannot build an outline without hits")
    cluster_params = cluster_params or ClusterParams()
    entries, _ = _titled_clusters(hits, index, corpus, cluster_params, chat)
    entries = sorted(entries, key=lambda e: (-e.stability, e.cluster_id))

    if not reorganize_enabled:
        return concat_fallback(entries)

    toc_text = reorganize(entries, chat)
    outline = parse_toc(toc_text)
    cluster_by_title = {e.title: str(e.cluster_id) for e in reversed(entries)}
    for node, _ in outline.walk():
        node.source_cluster = cluster_by_title.get(node.title)
    return outline


def generate_sections(
    outline: Outline,
    index: VectorIndex,
    corpus: Corpus,
    chat: ChatProvider,
    embedder: EmbeddingProvider,
    gen_params: GenParams | None = None,
    node_ids: list[str] | None = None,
) -> dict[str, SectionDraft]:
    """Generate drafts for the requested leaves (default: all of them)."""
    gen_params = gen_params or GenParams()
    leaves = outline.leaves()
    if node_ids is not None:
        wanted = set(node_ids)
        leaves = [leaf for leaf in leaves if leaf.node_id in wanted]
    drafts: dict[str, SectionDraft] = {}
    for leaf in leaves:
        heading = path_query(outline, leaf.node_id)
        paragraphs = retrieve_for_section(index, heading, gen_params.per_section_m, embedder, corpus)
        draft = generate_section(heading, paragraphs, chat, gen_params, node_id=leaf.node_id)
        drafts[leaf.node_id] = validate_citations(draft, [p.ref for p in paragraphs], corpus)
    return drafts


def params_snapshot(
    retrieval_params: RetrievalParams,
    cluster_params: ClusterParams,
    gen_params: GenParams,
    index: VectorIndex,
    mock: bool,
    reorganize_enabled: bool,
) -> dict:
    return {
        "retrieval": {
            "k": retrieval_params.k,
            "fetch_k": retrieval_params.fetch_k,
            "lambda": retrieval_params.lambda_,
            "sim_threshold": retrieval_params.sim_threshold,
            "mode": retrieval_params.mode,
        },
        "clustering": {
            "min_cluster_size": cluster_params.min_cluster_size,
            "min_samples": cluster_params.effective_min_samples,
        },
        "generation": {
            "per_section_m": gen_params.per_section_m,
            "batch_size": gen_params.batch_size,
            "max_iterations": gen_params.max_iterations,
        },
        "index": {"mode": index.mode, "dimension": index.dimension},
        "providers": {"mock": mock},
        "reorganize": reorganize_enabled,
    }


def pipeline_mode(index: VectorIndex, retrieval_params: RetrievalParams, reorganize_enabled: bool) -> dict:
    return {
        "index_mode": index.mode,
        "retrieval_mode": retrieval_params.mode,
        "reorganize": reorganize_enabled,
    }
