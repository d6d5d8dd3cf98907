"""HTTP/JSON API exposing the interactive workflow stage by stage.

Sessions move through retrieval -> curation -> outline -> generation ->
download. Long stages run as background jobs behind 202 + polling; every
state transition persists the session file, so steering survives restarts.
State-changing endpoints honor an Idempotency-Key header: replaying a key
returns the stored response instead of duplicating work.
"""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse

from .clustering import ClusterParams
from .config import EngineConfig
from .contentgen import GenParams
from .corpus import Corpus, ParagraphRef
from .errors import EmptyToc, NoCandidates, UnknownNode
from .indexer import VectorIndex, load_index
from .outline import parse_toc, serialize_toc
from .pipeline import (
    build_outline,
    generate_sections,
    make_providers,
    params_snapshot,
    pipeline_mode,
    timestamp,
)
from .report import Report, render_html, render_markdown, save_session
from .retrieval import ParagraphHit, RetrievalParams, search


@dataclass
class Session:
    session_id: str
    report: Report
    retrieval_params: RetrievalParams
    cluster_params: ClusterParams = field(default_factory=ClusterParams)
    gen_params: GenParams = field(default_factory=GenParams)
    reorganize: bool = True
    query_vec: np.ndarray | None = None
    status: dict = field(default_factory=lambda: {
        "outline": {"state": "idle", "error": None},
        "generation": {"state": "idle", "error": None, "nodes": {}},
    })
    lock: threading.RLock = field(default_factory=threading.RLock)


def _error(status_code: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status_code)


def _parse_session_params(
    raw: dict, cfg: "EngineConfig"
) -> tuple[RetrievalParams, ClusterParams, GenParams, bool]:
    """Per-session stage parameters; anything omitted takes the config default."""
    allowed = {
        "k", "fetch_k", "lambda", "sim_threshold", "mode",
        "min_cluster_size", "min_samples", "per_section_m", "batch_size",
        "max_iterations", "reorganize",
    }
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown params: {sorted(unknown)}")
    retrieval = RetrievalParams(
        k=int(raw.get("k", cfg.retrieval.k)),
        fetch_k=int(raw.get("fetch_k", cfg.retrieval.fetch_k)),
        lambda_=float(raw.get("lambda", cfg.retrieval.lambda_)),
        sim_threshold=float(raw.get("sim_threshold", cfg.retrieval.sim_threshold)),
        mode=str(raw.get("mode", cfg.retrieval.mode)),
    )
    clustering = ClusterParams(
        min_cluster_size=int(raw.get("min_cluster_size", cfg.clustering.min_cluster_size)),
        min_samples=int(raw["min_samples"]) if "min_samples" in raw else cfg.clustering.min_samples,
    )
    generation = GenParams(
        per_section_m=int(raw.get("per_section_m", cfg.generation.per_section_m)),
        batch_size=int(raw.get("batch_size", cfg.generation.batch_size)),
        max_iterations=int(raw.get("max_iterations", cfg.generation.max_iterations)),
    )
    reorganize = bool(raw.get("reorganize", cfg.reorganize))
    return retrieval, clustering, generation, reorganize


def create_app(
    cfg: EngineConfig,
    corpus: Corpus | None = None,
    index: VectorIndex | None = None,
    chat=None,
    embedder=None,
) -> FastAPI:
    """App factory; corpus/index/providers are injectable for tests."""
    if corpus is None:
        corpus = Corpus()
        corpus.ingest(cfg.corpus_path)
    if index is None:
        index = load_index(cfg.index_path, expected_fingerprint=corpus.fingerprint)
    if chat is None or embedder is None:
        chat, embedder = make_providers(
            corpus, mock=cfg.mock, chat_config=cfg.chat, embed_config=cfg.embed,
            dimension=index.dimension if cfg.mock else cfg.dimension,
        )

    app = FastAPI(title="caselawgen", version="0.1.0")
    # the companion UI may be served from a different origin during dev
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}
    idempotency: dict[tuple[str, str], tuple[int, dict]] = {}
    executor = ThreadPoolExecutor(max_workers=4)
    sessions_dir = Path(cfg.sessions_dir)
    vec_by_ref = {r.ref: r.vector for r in index.records}

    app.state.sessions = sessions
    app.state.executor = executor

    def persist(session: Session) -> None:
        sessions_dir.mkdir(parents=True, exist_ok=True)
        session.report.stage_status = session.status
        save_session(session.report, sessions_dir / f"{session.session_id}.json")

    def session_view(session: Session) -> dict:
        report = session.report
        groups: dict[str, list[dict]] = {}
        for hit in report.hits:
            groups.setdefault(hit.ref.judgment_id, []).append({
                "number": hit.ref.number,
                "rank": hit.rank,
                "similarity": hit.query_similarity,
            })
        judgments = []
        for judgment_id, paragraphs in groups.items():
            judgment = corpus.get_judgment(judgment_id)
            judgments.append({
                "judgment_id": judgment_id,
                "case_name": judgment.case_name,
                "date": judgment.date,
                "paragraphs": paragraphs,
            })
        outline = report.outline
        return {
            "session_id": session.session_id,
            "query": report.query,
            "params": report.params_snapshot,
            "pipeline_mode": report.pipeline_mode,
            "created_at": report.created_at,
            "hits": [
                {"judgment_id": h.ref.judgment_id, "number": h.ref.number,
                 "rank": h.rank, "similarity": h.query_similarity}
                for h in report.hits
            ],
            "judgments": judgments,
            "outline": outline.to_dict() if outline else None,
            "toc_text": serialize_toc(outline) if outline else None,
            "sections": {k: v.to_dict() for k, v in sorted(report.sections.items())},
            "status": session.status,
            "link_template": cfg.link_template,
        }

    def get_session(session_id: str) -> Session | None:
        return sessions.get(session_id)

    def replay(request: Request, key: str | None):
        if key is None:
            return None
        return idempotency.get((request.url.path, key))

    def remember(request: Request, key: str | None, status_code: int, body: dict) -> None:
        if key is not None:
            idempotency[(request.url.path, key)] = (status_code, body)

    @app.get("/health")
    def health():
        return {"status": "ok", "judgments": len(corpus), "index_records": len(index)}

    @app.get("/corpus/search")
    def corpus_search(q: str = "", limit: int = 10):
        if not q.strip():
            return _error(400, "query must be non-empty")
        if limit < 1 or limit > 100:
            return _error(400, "limit must be in [1, 100]")
        matches = corpus.fuzzy_search(q, limit)
        out = []
        for ref, score in matches:
            judgment = corpus.get_judgment(ref.judgment_id)
            text = corpus.get_paragraph(ref).text
            out.append({
                "judgment_id": ref.judgment_id,
                "number": ref.number,
                "case_name": judgment.case_name,
                "score": score,
                "snippet": text[:160],
            })
        return {"matches": out}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [
            {"session_id": s.session_id, "query": s.report.query, "status": s.status}
            for s in sessions.values()
        ]}

    @app.post("/sessions")
    def create_session(
        request: Request,
        payload: dict = Body(...),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        cached = replay(request, idempotency_key)
        if cached:
            return JSONResponse(cached[1], status_code=cached[0])

        query = str(payload.get("query", "")).strip()
        if not query:
            return _error(400, "query must be non-empty")
        try:
            params, cluster_params, gen_params, reorganize = _parse_session_params(
                payload.get("params", {}) or {}, cfg
            )
        except (ValueError, TypeError) as exc:
            return _error(400, f"invalid params: {exc}")

        try:
            hits = search(index, query, params, embedder)
        except NoCandidates as exc:
            return _error(422, str(exc))

        session_id = uuid.uuid4().hex[:12]
        report = Report(query=query, hits=hits, created_at=timestamp(cfg.mock))
        report.params_snapshot = params_snapshot(
            params, cluster_params, gen_params, index, cfg.mock, reorganize
        )
        report.pipeline_mode = pipeline_mode(index, params, reorganize)
        session = Session(
            session_id=session_id,
            report=report,
            retrieval_params=params,
            cluster_params=cluster_params,
            gen_params=gen_params,
            reorganize=reorganize,
            query_vec=embedder.embed_one(query),
        )
        sessions[session_id] = session
        persist(session)
        body = session_view(session)
        remember(request, idempotency_key, 201, body)
        return JSONResponse(body, status_code=201)

    @app.get("/sessions/{session_id}")
    def read_session(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        return session_view(session)

    @app.patch("/sessions/{session_id}/hits")
    def patch_hits(
        session_id: str,
        request: Request,
        payload: dict = Body(...),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        cached = replay(request, idempotency_key)
        if cached:
            return JSONResponse(cached[1], status_code=cached[0])

        op = payload.get("op")
        with session.lock:
            hits = list(session.report.hits)
            refs = [h.ref for h in hits]
            if op == "remove":
                ref = ParagraphRef(str(payload.get("judgment_id")), int(payload.get("number", 0)))
                if ref not in refs:
                    return _error(409, f"ref {ref} not in hit list")
                hits = [h for h in hits if h.ref != ref]
            elif op == "add":
                ref = ParagraphRef(str(payload.get("judgment_id")), int(payload.get("number", 0)))
                if ref in refs:
                    return _error(409, f"ref {ref} already in hit list")
                if not corpus.has(ref):
                    return _error(409, f"ref {ref} not in corpus")
                vector = vec_by_ref.get(ref)
                similarity = (
                    float(vector @ session.query_vec)
                    if vector is not None and session.query_vec is not None
                    else 0.0
                )
                hits.append(ParagraphHit(ref, similarity, len(hits)))
            elif op == "reorder":
                try:
                    order = [ParagraphRef(str(j), int(n)) for j, n in payload.get("order", [])]
                except (TypeError, ValueError):
                    return _error(400, "malformed order")
                if sorted(order) != sorted(refs) or len(order) != len(refs):
                    return _error(400, "order must be a complete permutation of current hits")
                by_ref = {h.ref: h for h in hits}
                hits = [by_ref[ref] for ref in order]
            else:
                return _error(400, f"unknown op {op!r}")

            session.report.hits = [
                ParagraphHit(h.ref, h.query_similarity, rank) for rank, h in enumerate(hits)
            ]
            persist(session)
            body = session_view(session)
        remember(request, idempotency_key, 200, body)
        return JSONResponse(body, status_code=200)

    def _run_outline_job(session: Session) -> None:
        stage = "clustering"
        try:
            stage = "clustering/labeling"
            outline = build_outline(
                session.report.hits, index, corpus, chat,
                cluster_params=session.cluster_params,
                reorganize_enabled=session.reorganize,
            )
            with session.lock:
                session.report.outline = outline
                session.report.sections = {}
                session.status["outline"] = {"state": "done", "error": None}
                persist(session)
        except Exception as exc:  # stage-attributed failure surfaces on poll
            with session.lock:
                session.status["outline"] = {"state": "failed", "error": f"{stage}: {exc}"}
                persist(session)

    @app.post("/sessions/{session_id}/outline", status_code=202)
    def start_outline(
        session_id: str,
        request: Request,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        cached = replay(request, idempotency_key)
        if cached:
            return JSONResponse(cached[1], status_code=cached[0])
        with session.lock:
            if not session.report.hits:
                return _error(409, "session has no hits")
            if session.status["outline"]["state"] == "running":
                return _error(409, "outline job already running")
            session.status["outline"] = {"state": "running", "error": None}
        executor.submit(_run_outline_job, session)
        body = {"status": "running"}
        remember(request, idempotency_key, 202, body)
        return JSONResponse(body, status_code=202)

    @app.get("/sessions/{session_id}/outline")
    def poll_outline(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            state = dict(session.status["outline"])
        if state["state"] == "failed":
            return _error(500, state["error"] or "outline job failed", status="failed")
        outline = session.report.outline
        return {
            "status": state["state"],
            "outline": outline.to_dict() if outline else None,
            "toc_text": serialize_toc(outline) if outline else None,
        }

    @app.put("/sessions/{session_id}/outline")
    def put_outline(
        session_id: str,
        request: Request,
        payload: dict = Body(...),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        cached = replay(request, idempotency_key)
        if cached:
            return JSONResponse(cached[1], status_code=cached[0])
        try:
            outline = parse_toc(str(payload.get("toc_text", "")))
        except EmptyToc as exc:
            return _error(400, str(exc))
        with session.lock:
            # node ids are positional, so re-home existing drafts by leaf
            # title; a renamed heading drops its draft (content was written
            # for the old heading), a moved one keeps it
            old_outline = session.report.outline
            drafts_by_title: dict[str, object] = {}
            if old_outline is not None:
                for leaf in old_outline.leaves():
                    if leaf.node_id in session.report.sections:
                        drafts_by_title.setdefault(leaf.title, session.report.sections[leaf.node_id])
            sections = {}
            for leaf in outline.leaves():
                draft = drafts_by_title.pop(leaf.title, None)
                if draft is not None:
                    draft.node_id = leaf.node_id
                    sections[leaf.node_id] = draft
            session.report.outline = outline
            session.report.sections = sections
            session.status["outline"] = {"state": "done", "error": None}
            persist(session)
            body = session_view(session)
        remember(request, idempotency_key, 200, body)
        return JSONResponse(body, status_code=200)

    def _run_generation_job(session: Session, node_ids: list[str] | None) -> None:
        outline = session.report.outline
        assert outline is not None
        nodes = node_ids if node_ids is not None else [l.node_id for l in outline.leaves()]
        per_node: dict[str, str] = {}
        failed = False
        for node_id in nodes:
            try:
                drafts = generate_sections(
                    outline, index, corpus, chat, embedder,
                    gen_params=session.gen_params, node_ids=[node_id],
                )
                with session.lock:
                    session.report.sections.update(drafts)
                per_node[node_id] = "done"
            except Exception as exc:  # per-node failures reported individually
                per_node[node_id] = f"failed: {exc}"
                failed = True
        with session.lock:
            session.status["generation"] = {
                "state": "failed" if failed else "done",
                "error": "; ".join(f"{k}: {v}" for k, v in per_node.items() if v != "done") or None,
                "nodes": per_node,
            }
            persist(session)

    def _start_generation(session, request, idempotency_key, node_ids):
        cached = replay(request, idempotency_key)
        if cached:
            return JSONResponse(cached[1], status_code=cached[0])
        with session.lock:
            if session.report.outline is None:
                return _error(409, "session has no outline")
            if session.status["generation"]["state"] == "running":
                return _error(409, "generation job already running")
            if node_ids is not None:
                outline = session.report.outline
                for node_id in node_ids:
                    try:
                        node = outline.find(node_id)
                    except UnknownNode:
                        return _error(404, f"unknown outline node {node_id!r}")
                    if not node.is_leaf():
                        return _error(409, f"outline node {node_id!r} is not a leaf")
            session.status["generation"] = {"state": "running", "error": None, "nodes": {}}
        executor.submit(_run_generation_job, session, node_ids)
        body = {"status": "running"}
        remember(request, idempotency_key, 202, body)
        return JSONResponse(body, status_code=202)

    @app.post("/sessions/{session_id}/sections/{node_id}/generate", status_code=202)
    def generate_one(
        session_id: str,
        node_id: str,
        request: Request,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        return _start_generation(session, request, idempotency_key, [node_id])

    @app.post("/sessions/{session_id}/generate_all", status_code=202)
    def generate_all(
        session_id: str,
        request: Request,
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        return _start_generation(session, request, idempotency_key, None)

    @app.get("/sessions/{session_id}/generation")
    def poll_generation(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            return dict(session.status["generation"])

    @app.get("/sessions/{session_id}/report.md")
    def report_md(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if session.report.outline is None:
            return _error(409, "session has no outline")
        text = render_markdown(session.report, cfg.link_template)
        return PlainTextResponse(text, media_type="text/markdown; charset=utf-8")

    @app.get("/sessions/{session_id}/report.html")
    def report_html(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if session.report.outline is None:
            return _error(409, "session has no outline")
        return HTMLResponse(render_html(session.report, cfg.link_template))

    ui_dir = Path(cfg.ui_dir) if cfg.ui_dir else Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    if ui_dir.is_dir():  # serve the companion UI when it has been built
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
