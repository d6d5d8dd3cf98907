"""Per-section content generation with enforced citation format.

Each outline leaf gets a path-augmented query, a pure-relevance retrieval,
and iterative incremental generation: the first call sees one batch of
paragraphs, later calls see the text so far plus the next batch. Citation
tokens are "(judgment_id#number)".
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Paragraph, ParagraphRef
from .errors import EmptyRetrieval, NoCandidates, ProviderUnavailable
from .indexer import VectorIndex
from .providers import ChatProvider, ChatRequest, EmbeddingProvider

logger = logging.getLogger(__name__)

CITATION_RE = re.compile(r"\(([^\s#()]+)#(\d+)\)")

CONTENT_SYSTEM_PROMPT = (
    "You are a legal expert tasked with generating content for a case-law "
    "guidelines section based on the given section heading, the current "
    "section content, and a set of paragraphs extracted from case law "
    "documents. Your goal is to synthesize the information from these "
    "paragraphs to extend and create clear and accurate content without "
    "sections like introductions or subsections. The content should be "
    "strictly related to the heading and logically coherent, and the "
    "relevant paragraphs from the case law documents should be cited by "
    "their ids. Provide thorough explanations, elaborate on key points, and "
    "include examples where relevant."
)

CONTENT_USER_TEMPLATE = """[Instructions]
1. Review the provided set of paragraphs extracted from case law documents;
2. Consider only those paragraphs that are strictly related to the keywords in the heading;
3. Develop content based on the principles contained in the paragraphs and ensure the content is clear and concise;
4. Citations: whenever a guideline is influenced by or derived from a specific paragraph, cite that paragraph by its id and number in parentheses as (id#paragraph_number);
5. Maintain a professional and formal tone throughout;
6. Only generate content in relation to the keywords in the heading and focus on the specific standards implied by those keywords;
7. Return a coherent answer comprising general observations and standards from the Convention and specific observations and standards implied by the keywords in the heading;
8. Extend the previously generated content with the new content, revising and integrating it smoothly to form a coherent narrative;

[Heading]
{heading}

[Previous Content]
{previous}

[Paragraphs]
{paragraphs}

Return the generated content and nothing else. Make sure to use only the paragraphs related to the heading."""


@dataclass
class GenParams:
    per_section_m: int = 75
    batch_size: int = 25
    max_iterations: int = 10

    def __post_init__(self) -> None:
        if self.per_section_m < 1 or self.batch_size < 1 or self.max_iterations < 1:
            raise ValueError("GenParams values must be positive")


@dataclass
class SectionDraft:
    node_id: str
    text: str
    citations: list[ParagraphRef] = field(default_factory=list)
    unresolved: list[ParagraphRef] = field(default_factory=list)
    generation_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "text": self.text,
            "citations": [[r.judgment_id, r.number] for r in self.citations],
            "unresolved": [[r.judgment_id, r.number] for r in self.unresolved],
            "generation_error": self.generation_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SectionDraft":
        return cls(
            node_id=d["node_id"],
            text=d["text"],
            citations=[ParagraphRef(j, n) for j, n in d.get("citations", [])],
            unresolved=[ParagraphRef(j, n) for j, n in d.get("unresolved", [])],
            generation_error=d.get("generation_error"),
        )


def retrieve_for_section(
    index: VectorIndex,
    path_query_text: str,
    m: int,
    embedder: EmbeddingProvider,
    corpus: Corpus,
) -> list[Paragraph]:
    """Pure relevance top-m by cosine for one section (no MMR here)."""
    if len(index) == 0:
        raise NoCandidates("index has no records")
    query_vec = embedder.embed_one(path_query_text)
    sims = index.matrix.astype(np.float64) @ np.asarray(query_vec, dtype=np.float64)
    ranked = sorted(range(len(index)), key=lambda i: (-sims[i], index.records[i].ref))
    return [corpus.get_paragraph(index.records[i].ref) for i in ranked[:m]]


def _render_paragraphs(paragraphs: list[Paragraph]) -> str:
    return "\n".join(f"{p.judgment_id}#{p.number}: {' '.join(p.text.split())}" for p in paragraphs)


def generate_section(
    heading_path: str,
    paragraphs: list[Paragraph],
    provider: ChatProvider,
    params: GenParams | None = None,
    node_id: str = "",
) -> SectionDraft:
    """Iteratively extend section text, one paragraph batch per chat call.

    Stops when paragraphs are exhausted or max_iterations is hit; the last
    response is the section text. A provider failure preserves the partial
    draft and flags it instead of losing completed iterations.
    """
    params = params or GenParams()
    if not paragraphs:
        raise EmptyRetrieval(f"no paragraphs retrieved for {heading_path!r}")

    batches = [
        paragraphs[i : i + params.batch_size]
        for i in range(0, len(paragraphs), params.batch_size)
    ][: params.max_iterations]

    text = ""
    error: str | None = None
    for batch in batches:
        request = ChatRequest(
            system_prompt=CONTENT_SYSTEM_PROMPT,
            user_prompt=CONTENT_USER_TEMPLATE.format(
                heading=heading_path,
                previous=text,
                paragraphs=_render_paragraphs(batch),
            ),
            stage="content",
        )
        try:
            text = provider.chat(request)
        except ProviderUnavailable as exc:
            error = f"generation stopped early: {exc}"
            logger.warning("%s (section %s)", error, heading_path)
            break

    draft = SectionDraft(node_id=node_id, text=text, generation_error=error)
    draft.citations = extract_citations(text)
    return draft


def extract_citations(text: str) -> list[ParagraphRef]:
    """Citation tokens in order of first appearance, duplicates collapsed."""
    seen: set[ParagraphRef] = set()
    out: list[ParagraphRef] = []
    for m in CITATION_RE.finditer(text):
        ref = ParagraphRef(m.group(1), int(m.group(2)))
        if ref not in seen:
            seen.add(ref)
            out.append(ref)
    return out


def validate_citations(
    draft: SectionDraft,
    provided_refs: list[ParagraphRef],
    corpus: Corpus,
) -> SectionDraft:
    """Populate draft.unresolved; unresolved citations are kept, never dropped.

    A citation is unresolved when it was not among the paragraphs shown to
    the model or does not exist in the corpus (a hallucinated reference).
    """
    provided = set(provided_refs)
    draft.unresolved = [
        ref for ref in draft.citations if ref not in provided or not corpus.has(ref)
    ]
    return draft
