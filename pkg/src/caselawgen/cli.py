"""Batch driver: every pipeline stage as a file-composable command.

Commands hand off through session files; ``--seed-mock`` swaps in the
deterministic offline providers so runs are byte-reproducible. Exit codes:
0 success, 1 usage error, 2 pipeline error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .clustering import ClusterParams
from .config import EngineConfig, load_config
from .contentgen import GenParams
from .corpus import Corpus
from .errors import CaselawgenError
from .evalsuite import eval_content, eval_structure, results_jsonl, summary_csv, aggregate
from .indexer import build_index, load_index, save_index
from .outline import serialize_toc
from .pipeline import (
    build_outline,
    generate_sections,
    make_providers,
    params_snapshot,
    pipeline_mode,
    timestamp,
)
from .report import Report, load_session, render_html, render_markdown, save_session
from .retrieval import RetrievalParams, search


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, with a remedy
        print(f"usage error: {message} (run with --help for flags)", file=sys.stderr)
        sys.exit(1)


def _load_corpus(path: str) -> Corpus:
    corpus = Corpus()
    corpus.ingest(path)
    return corpus


def _providers(args, corpus: Corpus):
    if args.seed_mock:
        return make_providers(corpus, mock=True)
    if not args.config:
        raise CaselawgenError("real providers need --config (or pass --seed-mock for offline runs)")
    cfg = load_config(args.config)
    return make_providers(
        corpus, mock=cfg.mock, chat_config=cfg.chat, embed_config=cfg.embed, dimension=cfg.dimension
    )


def cmd_ingest(args) -> int:
    corpus = _load_corpus(args.corpus)
    stats = corpus.stats
    print(f"judgments: {stats.judgment_count}")
    print(f"paragraphs: {stats.paragraph_count}")
    for lineno, reason in stats.rejected_records:
        print(f"rejected line {lineno}: {reason}", file=sys.stderr)
    print(f"rejected: {len(stats.rejected_records)}")
    return 0


def cmd_index(args) -> int:
    corpus = _load_corpus(args.corpus)
    chat, embedder = _providers(args, corpus)
    index = build_index(corpus, embedder, chat, mode=args.mode, batch_size=args.batch_size)
    save_index(index, args.out)
    print(f"indexed {len(index)} paragraphs ({args.mode}) -> {args.out}")
    return 0


def cmd_query(args) -> int:
    corpus = _load_corpus(args.corpus)
    chat, embedder = _providers(args, corpus)
    index = load_index(args.index, expected_fingerprint=corpus.fingerprint)
    params = RetrievalParams(
        k=args.k, fetch_k=args.fetch_k, lambda_=args.lambda_, sim_threshold=args.threshold, mode=args.mode
    )
    hits = search(index, args.q, params, embedder)

    report = Report(query=args.q, hits=hits, created_at=timestamp(args.seed_mock))
    report.params_snapshot = params_snapshot(
        params, ClusterParams(), GenParams(), index, args.seed_mock, reorganize_enabled=True
    )
    report.pipeline_mode = pipeline_mode(index, params, reorganize_enabled=True)
    report.stage_status = {"retrieval": "done"}
    save_session(report, args.session)
    for hit in hits:
        print(f"{hit.rank:3d}  {hit.query_similarity:+.4f}  {hit.ref}")
    print(f"session -> {args.session}")
    return 0


def cmd_outline(args) -> int:
    corpus = _load_corpus(args.corpus)
    chat, embedder = _providers(args, corpus)
    index = load_index(args.index, expected_fingerprint=corpus.fingerprint)
    report = load_session(args.session)
    if not report.hits:
        raise CaselawgenError("session has no hits; run `query` first")

    cluster_params = ClusterParams(min_cluster_size=args.min_cluster_size)
    reorganize_enabled = not args.no_reorganize
    report.outline = build_outline(
        report.hits, index, corpus, chat,
        cluster_params=cluster_params, reorganize_enabled=reorganize_enabled,
    )
    report.params_snapshot["clustering"] = {
        "min_cluster_size": cluster_params.min_cluster_size,
        "min_samples": cluster_params.effective_min_samples,
    }
    report.params_snapshot["reorganize"] = reorganize_enabled
    report.pipeline_mode["reorganize"] = reorganize_enabled
    report.stage_status["outline"] = "done"
    save_session(report, args.session)
    print(serialize_toc(report.outline))
    return 0


def cmd_generate(args) -> int:
    corpus = _load_corpus(args.corpus)
    chat, embedder = _providers(args, corpus)
    index = load_index(args.index, expected_fingerprint=corpus.fingerprint)
    report = load_session(args.session)
    if report.outline is None:
        raise CaselawgenError("session has no outline; run `outline` first")

    gen_params = GenParams(
        per_section_m=args.per_section_m, batch_size=args.batch_size, max_iterations=args.max_iterations
    )
    node_ids = [args.node] if args.node else None
    drafts = generate_sections(
        report.outline, index, corpus, chat, embedder, gen_params=gen_params, node_ids=node_ids
    )
    if args.node and not drafts:
        raise CaselawgenError(f"outline node {args.node!r} is not a leaf (or does not exist)")
    report.sections.update(drafts)
    report.params_snapshot["generation"] = {
        "per_section_m": gen_params.per_section_m,
        "batch_size": gen_params.batch_size,
        "max_iterations": gen_params.max_iterations,
    }
    report.stage_status["generation"] = "done"
    save_session(report, args.session)
    unresolved = sum(len(d.unresolved) for d in drafts.values())
    print(f"generated {len(drafts)} section(s); unresolved citations: {unresolved}")
    return 0


def cmd_report(args) -> int:
    report = load_session(args.session)
    if report.outline is None:
        raise CaselawgenError("session has no outline; nothing to render")
    rendered = (
        render_markdown(report, args.link_template)
        if args.format == "md"
        else render_html(report, args.link_template)
    )
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"report -> {args.out}")
    else:
        print(rendered)
    return 0


def cmd_eval(args) -> int:
    report = load_session(args.session)
    if report.outline is None:
        raise CaselawgenError("session has no outline; run `outline` first")
    corpus = _load_corpus(args.corpus)
    chat, _ = _providers(args, corpus)
    reference = Path(args.reference).read_text(encoding="utf-8") if args.reference else None

    results = []
    if args.target == "structure":
        for r in eval_structure(report.query, report.outline, chat, reference_toc=reference):
            results.append((args.system, r))
    else:
        for leaf in report.outline.leaves():
            draft = report.sections.get(leaf.node_id)
            if draft is None:
                continue
            cited = [
                corpus.get_paragraph(ref).text for ref in draft.citations if corpus.has(ref)
            ]
            heading = " - ".join(report.outline.path_titles(leaf.node_id))
            for r in eval_content(heading, draft.text, cited, chat, reference_content=reference):
                results.append((args.system, r))
    if not results:
        raise CaselawgenError("nothing to evaluate (no drafted sections?)")

    csv_text = summary_csv(aggregate(results))
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text, encoding="utf-8")
    if args.out_jsonl:
        Path(args.out_jsonl).write_text(results_jsonl(results), encoding="utf-8")
    print(csv_text, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config) if args.config else EngineConfig()
    app = create_app(cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="caselawgen", description="Case-law topical report engine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_index=True):
        p.add_argument("--corpus", required=True, help="line-delimited JSON corpus file")
        if needs_index:
            p.add_argument("--index", required=True, help="vector index file")
        p.add_argument("--seed-mock", action="store_true", help="use deterministic offline providers")
        p.add_argument("--config", help="key=value config file for real providers")

    p = sub.add_parser("ingest", help="validate and summarize a corpus file")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build and persist the vector index")
    common(p, needs_index=False)
    p.add_argument("--mode", choices=["keyphrase", "paragraph"], default="keyphrase")
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="retrieve paragraphs and start a session")
    common(p)
    p.add_argument("--q", required=True, help="topical query text")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--fetch-k", type=int, default=200)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--mode", choices=["mmr", "relevance"], default="mmr")
    p.add_argument("--session", required=True, help="session file to create")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("outline", help="cluster hits and build the table of contents")
    common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--no-reorganize", action="store_true", help="skip the reorganization call")
    p.add_argument("--min-cluster-size", type=int, default=5)
    p.set_defaults(func=cmd_outline)

    p = sub.add_parser("generate", help="generate section contents")
    common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--node", help="generate only this outline leaf")
    p.add_argument("--per-section-m", type=int, default=75)
    p.add_argument("--batch-size", type=int, default=25)
    p.add_argument("--max-iterations", type=int, default=10)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("report", help="render the assembled report")
    p.add_argument("--session", required=True)
    p.add_argument("--format", choices=["md", "html"], default="md")
    p.add_argument("--out")
    p.add_argument("--link-template", default="https://hudoc.echr.coe.int/eng?i={id}")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("eval", help="LLM-judge scoring of structure or content")
    p.add_argument("target", choices=["structure", "content"])
    p.add_argument("--session", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--reference", help="reference ToC / content file")
    p.add_argument("--system", default="full", help="system name for the summary table")
    p.add_argument("--out-csv")
    p.add_argument("--out-jsonl")
    p.add_argument("--seed-mock", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CaselawgenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
