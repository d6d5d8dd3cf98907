"""Report assembly, rendering, and session persistence.

A Report is the session artifact: query, curated hits, outline, section
drafts, and the parameter snapshot that makes a mock re-run reproducible.
Rendering is pure (no corpus or provider access) and deterministic.
"""
from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .contentgen import CITATION_RE, SectionDraft
from .corpus import ParagraphRef
from .errors import BadTemplate, CorruptSession, UnknownLeafId
from .outline import Outline
from .retrieval import ParagraphHit

SESSION_VERSION = 1
DEFAULT_LINK_TEMPLATE = "https://hudoc.echr.coe.int/eng?i={id}"
NOT_GENERATED = "*[section not generated]*"
UNRESOLVED_MARK = "⚠"


@dataclass
class Report:
    query: str
    outline: Outline | None = None
    sections: dict[str, SectionDraft] = field(default_factory=dict)
    params_snapshot: dict = field(default_factory=dict)
    pipeline_mode: dict = field(default_factory=dict)
    created_at: str = ""
    hits: list[ParagraphHit] = field(default_factory=list)
    stage_status: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": SESSION_VERSION,
            "query": self.query,
            "outline": self.outline.to_dict() if self.outline else None,
            "sections": {k: v.to_dict() for k, v in sorted(self.sections.items())},
            "params_snapshot": self.params_snapshot,
            "pipeline_mode": self.pipeline_mode,
            "created_at": self.created_at,
            "hits": [
                {"judgment_id": h.ref.judgment_id, "number": h.ref.number,
                 "query_similarity": h.query_similarity, "rank": h.rank}
                for h in self.hits
            ],
            "stage_status": self.stage_status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("version") != SESSION_VERSION:
            raise CorruptSession(f"unsupported session version {d.get('version')!r}")
        return cls(
            query=d["query"],
            outline=Outline.from_dict(d["outline"]) if d.get("outline") else None,
            sections={k: SectionDraft.from_dict(v) for k, v in d.get("sections", {}).items()},
            params_snapshot=d.get("params_snapshot", {}),
            pipeline_mode=d.get("pipeline_mode", {}),
            created_at=d.get("created_at", ""),
            hits=[
                ParagraphHit(ParagraphRef(h["judgment_id"], h["number"]), h["query_similarity"], h["rank"])
                for h in d.get("hits", [])
            ],
            stage_status=d.get("stage_status", {}),
        )


def assemble(outline: Outline, drafts: dict[str, SectionDraft], query: str = "") -> Report:
    """Attach drafts to outline leaves; missing sections get markers, not errors."""
    leaf_ids = {leaf.node_id for leaf in outline.leaves()}
    for node_id in drafts:
        if node_id not in leaf_ids:
            raise UnknownLeafId(f"draft for unknown or non-leaf node {node_id!r}")
    return Report(query=query, outline=outline, sections=dict(drafts))


def missing_sections(report: Report) -> list[str]:
    if report.outline is None:
        return []
    return [leaf.node_id for leaf in report.outline.leaves() if leaf.node_id not in report.sections]


def _check_template(link_template: str) -> None:
    if "{id}" not in link_template:
        raise BadTemplate("link template must contain the {id} placeholder")


def _cite_markdown(draft: SectionDraft, link_template: str) -> str:
    unresolved = set(draft.unresolved)

    def repl(m: re.Match) -> str:
        ref = ParagraphRef(m.group(1), int(m.group(2)))
        if ref in unresolved:
            return f"{UNRESOLVED_MARK}({ref.judgment_id}#{ref.number})"
        url = link_template.replace("{id}", ref.judgment_id).replace("{para}", str(ref.number))
        return f"[({ref.judgment_id} § {ref.number})]({url})"

    return CITATION_RE.sub(repl, draft.text)


def render_markdown(report: Report, link_template: str = DEFAULT_LINK_TEMPLATE) -> str:
    """Markdown render: outline headings (clamped at ###) + linked citations."""
    _check_template(link_template)
    if report.outline is None:
        raise ValueError("report has no outline")
    lines: list[str] = [f"# {report.query}".rstrip(), ""]
    for node, depth in report.outline.walk():
        level = min(depth + 1, 3)
        lines.append(f"{'#' * level} {node.title}")
        lines.append("")
        if node.is_leaf():
            draft = report.sections.get(node.node_id)
            lines.append(_cite_markdown(draft, link_template) if draft else NOT_GENERATED)
            lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _cite_html(draft: SectionDraft, link_template: str) -> str:
    unresolved = set(draft.unresolved)
    escaped = html.escape(draft.text)

    def repl(m: re.Match) -> str:
        ref = ParagraphRef(m.group(1), int(m.group(2)))
        token = f"({ref.judgment_id}#{ref.number})"
        if ref in unresolved:
            return f'<span class="unresolved" title="unresolved citation">{UNRESOLVED_MARK}{token}</span>'
        url = link_template.replace("{id}", ref.judgment_id).replace("{para}", str(ref.number))
        return f'<a class="citation" href="{html.escape(url, quote=True)}">({ref.judgment_id} § {ref.number})</a>'

    return CITATION_RE.sub(repl, escaped)


_HTML_STYLE = """body { font-family: Georgia, serif; margin: 2rem auto; max-width: 50rem; line-height: 1.5; }
nav { border: 1px solid #ccc; padding: 1rem; margin-bottom: 2rem; }
nav ul { margin: 0; padding-left: 1.25rem; }
a.citation { color: #1a4b8b; text-decoration: none; }
span.unresolved { color: #b00020; font-weight: bold; }
@media print { nav { display: none; } }"""


def render_html(report: Report, link_template: str = DEFAULT_LINK_TEMPLATE) -> str:
    """Print-ready HTML5 document with a nav list mirroring the outline."""
    _check_template(link_template)
    if report.outline is None:
        raise ValueError("report has no outline")

    def nav_list(nodes: list) -> str:
        items = []
        for node in nodes:
            inner = nav_list(node.children) if node.children else ""
            items.append(f'<li><a href="#{node.node_id}">{html.escape(node.title)}</a>{inner}</li>')
        return "<ul>" + "".join(items) + "</ul>"

    body: list[str] = [f"<h1>{html.escape(report.query)}</h1>"]
    body.append(f"<nav>{nav_list(report.outline.roots)}</nav>")
    for node, depth in report.outline.walk():
        level = min(depth + 1, 3)
        body.append(f'<h{level} id="{node.node_id}">{html.escape(node.title)}</h{level}>')
        if node.is_leaf():
            draft = report.sections.get(node.node_id)
            if draft:
                body.append(f"<p>{_cite_html(draft, link_template)}</p>")
            else:
                body.append('<p class="missing"><em>[section not generated]</em></p>')
    return (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{html.escape(report.query)}</title>\n<style>\n{_HTML_STYLE}\n</style>\n</head>\n<body>\n"
        + "\n".join(body)
        + "\n</body>\n</html>\n"
    )


def save_session(report: Report, path: str | Path) -> None:
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def load_session(path: str | Path) -> Report:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptSession(f"unreadable session file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CorruptSession(f"session file {path} is not a JSON object")
    try:
        return Report.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise CorruptSession(f"session file {path} is missing fields: {exc}") from exc
