"""Report outline: cluster labeling, reorganization, ToC grammar.

The interchange format between engine, UI, and golden files is plain ToC
text: one node per non-blank line, depth = leading spaces / 4, optional
list markers ("I.", "A.", "1.", "-", "*") stripped but remembered.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .corpus import Paragraph
from .errors import EmptyToc, FormatViolation, NotALeaf, UnknownNode
from .providers import ChatProvider, ChatRequest

logger = logging.getLogger(__name__)

PATH_SEPARATOR = " - "

TOPIC_LABEL_TEMPLATE = (
    "You are given a list of paragraphs extracted from the European Court of "
    "Human Rights case law, and your task is to generate a detailed topic label "
    "to represent these paragraphs in ECHR case-law guidelines. Here is the "
    "list of paragraphs:\n\n{documents}\n\n"
    "Based on the information above, generate a detailed topic label in the "
    "following format and nothing more:\ntopic: <topic label>"
)

REORGANIZE_TEMPLATE = (
    "I have a list of topics related to European Court of Human Rights (ECHR) "
    "case law documents. I would like you to organize these topics into a "
    "coherent and structured Table of Contents (ToC) similar to a legal ECHR "
    "guideline document. Please group related topics under appropriate sections "
    "and subsections, ensuring a logical flow. The ToC should include main "
    "headings, subheadings, and possibly further subdivisions where necessary, "
    "with 4 spaces indentation and without general sections such as "
    "introduction and conclusion. The final structure should resemble an "
    "outline for comprehensive legal report guidelines that aligns with the "
    "topics.\n\n[Topics]\n{topics}\n\n"
    "Please only return a well-structured ToC and nothing else."
)

_MARKER_RE = re.compile(r"^((?:[IVXLCDM]+\.)|(?:[A-Za-z]\.)|(?:\d+\.)|[-*])\s+")


@dataclass
class OutlineNode:
    node_id: str
    title: str
    children: list["OutlineNode"] = field(default_factory=list)
    source_cluster: str | None = None
    marker: str | None = None

    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "title": self.title,
            "marker": self.marker,
            "source_cluster": self.source_cluster,
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutlineNode":
        return cls(
            node_id=d["node_id"],
            title=d["title"],
            marker=d.get("marker"),
            source_cluster=d.get("source_cluster"),
            children=[cls.from_dict(c) for c in d.get("children", [])],
        )


@dataclass
class Outline:
    roots: list[OutlineNode] = field(default_factory=list)

    def walk(self) -> list[tuple[OutlineNode, int]]:
        out: list[tuple[OutlineNode, int]] = []

        def visit(node: OutlineNode, depth: int) -> None:
            out.append((node, depth))
            for child in node.children:
                visit(child, depth + 1)

        for root in self.roots:
            visit(root, 0)
        return out

    def find(self, node_id: str) -> OutlineNode:
        for node, _ in self.walk():
            if node.node_id == node_id:
                return node
        raise UnknownNode(f"no outline node {node_id!r}")

    def leaves(self) -> list[OutlineNode]:
        return [node for node, _ in self.walk() if node.is_leaf()]

    def path_titles(self, node_id: str) -> list[str]:
        def visit(node: OutlineNode, trail: list[str]) -> list[str] | None:
            trail = trail + [node.title]
            if node.node_id == node_id:
                return trail
            for child in node.children:
                found = visit(child, trail)
                if found:
                    return found
            return None

        for root in self.roots:
            found = visit(root, [])
            if found:
                return found
        raise UnknownNode(f"no outline node {node_id!r}")

    def to_dict(self) -> dict:
        return {"roots": [r.to_dict() for r in self.roots]}

    @classmethod
    def from_dict(cls, d: dict) -> "Outline":
        return cls(roots=[OutlineNode.from_dict(r) for r in d.get("roots", [])])


@dataclass(frozen=True)
class TitledCluster:
    """A labeled cluster headed for the ToC, with optional subtopic titles."""

    title: str
    subtitles: tuple[str, ...] = ()
    stability: float = 0.0
    cluster_id: int = 0


def _render_documents(paragraphs: list[Paragraph]) -> str:
    return "\n".join("- " + " ".join(p.text.split()) for p in paragraphs)


def _extract_topic(response: str) -> str | None:
    for line in response.splitlines():
        low = line.lower()
        if "topic:" in low:
            value = line[low.index("topic:") + len("topic:") :].strip()
            if value:
                return value
    return None


def label_cluster(representative_paragraphs: list[Paragraph], provider: ChatProvider) -> str:
    """Title one cluster from its representative paragraphs.

    The response must contain a "topic: <label>" line; one retry, then the
    fallback title is the first 6 words of the first representative.
    """
    if not 1 <= len(representative_paragraphs) <= 5:
        raise ValueError("label_cluster takes 1 to 5 representative paragraphs")
    request = ChatRequest(
        system_prompt="",
        user_prompt=TOPIC_LABEL_TEMPLATE.format(documents=_render_documents(representative_paragraphs)),
        stage="topic_label",
    )
    for attempt in range(2):
        topic = _extract_topic(provider.chat(request))
        if topic is not None:
            return topic
        if attempt == 0:
            logger.warning("topic label format violation; retrying once")
    logger.warning("topic label retry failed; falling back to lead words")
    fallback = " ".join(representative_paragraphs[0].text.split()[:6])
    if not fallback:
        raise FormatViolation("no usable topic label and empty fallback source")
    return fallback


def render_topics_block(entries: list[TitledCluster]) -> str:
    lines: list[str] = []
    for entry in entries:
        lines.append(entry.title)
        lines.extend("    " + sub for sub in entry.subtitles)
    return "\n".join(lines)


def reorganize(entries: list[TitledCluster], provider: ChatProvider) -> str:
    """One chat call turning labeled clusters into raw ToC text.

    The model may reorder, merge, and nest; the prompt forbids generic
    introduction/conclusion sections. Output goes to parse_toc.
    """
    if not entries:
        raise ValueError("reorganize requires at least one titled cluster")
    request = ChatRequest(
        system_prompt="",
        user_prompt=REORGANIZE_TEMPLATE.format(topics=render_topics_block(entries)),
        stage="reorganize",
    )
    return provider.chat(request)


def parse_toc(text: str) -> Outline:
    """Parse 4-space-indented ToC text into an Outline.

    Depth jumps greater than one level clamp to parent+1; blank lines are
    ignored; node ids are assigned in document order.
    """
    if not text.strip():
        raise EmptyToc("ToC text is empty")
    roots: list[OutlineNode] = []
    stack: list[tuple[int, OutlineNode]] = []  # (depth, node)
    counter = 0
    for raw in text.splitlines():
        if not raw.strip():
            continue
        line = raw.expandtabs(4)
        depth = (len(line) - len(line.lstrip(" "))) // 4
        stripped = line.strip()
        marker: str | None = None
        m = _MARKER_RE.match(stripped)
        if m and stripped[m.end() :].strip():
            marker = m.group(1)
            title = stripped[m.end() :].strip()
        else:
            title = stripped

        while stack and stack[-1][0] >= depth:
            stack.pop()
        parent_depth = stack[-1][0] if stack else -1
        if depth > parent_depth + 1:
            depth = parent_depth + 1
        counter += 1
        node = OutlineNode(node_id=f"n{counter}", title=title, marker=marker)
        if stack:
            stack[-1][1].children.append(node)
        else:
            roots.append(node)
        stack.append((depth, node))
    return Outline(roots=roots)


def serialize_toc(outline: Outline) -> str:
    lines: list[str] = []
    for node, depth in outline.walk():
        prefix = "    " * depth
        marker = f"{node.marker} " if node.marker else ""
        lines.append(f"{prefix}{marker}{node.title}")
    return "\n".join(lines)


def concat_fallback(entries: list[TitledCluster]) -> Outline:
    """No-reorganization ablation: clusters in stability-descending order."""
    if not entries:
        raise ValueError("concat_fallback requires at least one titled cluster")
    ordered = sorted(entries, key=lambda e: (-e.stability, e.cluster_id))
    roots: list[OutlineNode] = []
    counter = 0
    for entry in ordered:
        counter += 1
        root = OutlineNode(node_id=f"n{counter}", title=entry.title, source_cluster=str(entry.cluster_id))
        for sub in entry.subtitles:
            counter += 1
            root.children.append(OutlineNode(node_id=f"n{counter}", title=sub))
        roots.append(root)
    return Outline(roots=roots)


def path_query(outline: Outline, leaf_id: str) -> str:
    """Titles from root to leaf joined for section-scoped retrieval."""
    node = outline.find(leaf_id)
    if not node.is_leaf():
        raise NotALeaf(f"outline node {leaf_id!r} has children")
    return PATH_SEPARATOR.join(outline.path_titles(leaf_id))
