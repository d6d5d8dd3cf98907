"""LLM-as-judge scoring of outlines and section contents.

Five structure dimensions and four content dimensions, one judge call per
dimension, each prompted with an instruction, step-by-step reasoning, and
a form-filled "Score: N" on a 1-5 scale. Dimensions that need reference
material (comprehensiveness) return a not-evaluable result without it.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field

from .errors import ScoreParseFailure
from .outline import Outline, serialize_toc
from .providers import ChatProvider, ChatRequest

STRUCTURE_DIMENSIONS = (
    "structure.topical_relevance",
    "structure.subtopic_consistency",
    "structure.cluster_distinction",
    "structure.narrative_flow",
    "structure.comprehensiveness_topics",
)
CONTENT_DIMENSIONS = (
    "content.topical_relevance",
    "content.content_organization",
    "content.citation_faithfulness",
    "content.comprehensiveness",
)
ALL_DIMENSIONS = STRUCTURE_DIMENSIONS + CONTENT_DIMENSIONS

_STRUCTURE_CRITERIA = {
    "structure.topical_relevance": (
        "Topical relevance: how closely the headings and subheadings align "
        "with the user's query."
    ),
    "structure.subtopic_consistency": (
        "Subtopic consistency: whether the subtopics under each parent "
        "heading belong together, so each section is internally coherent."
    ),
    "structure.cluster_distinction": (
        "Cluster distinction: whether each topic is clearly differentiated "
        "from the others, with minimal redundancy between sections."
    ),
    "structure.narrative_flow": (
        "Narrative flow: whether the ordering of sections progresses "
        "logically and guides the reader smoothly through the topics."
    ),
    "structure.comprehensiveness_topics": (
        "Comprehensiveness of topics: whether the headings and subheadings "
        "cover all critical aspects of the query without significant gaps, "
        "judged against the reference table of contents."
    ),
}

_CONTENT_CRITERIA = {
    "content.topical_relevance": (
        "Topical relevance: how well the content aligns with its section heading."
    ),
    "content.content_organization": (
        "Content organization: the logical flow and coherence of the content throughout."
    ),
    "content.citation_faithfulness": (
        "Citation faithfulness: whether the statements are supported by the "
        "cited source paragraphs reproduced below."
    ),
    "content.comprehensiveness": (
        "Comprehensiveness: whether all relevant aspects of the section topic "
        "are addressed, judged against the reference content."
    ),
}

_JUDGE_TEMPLATE = """You are evaluating generated material for a case-law report.

[Evaluation Criterion]
{criterion}

[Evaluation Steps]
1. Read all provided material carefully.
2. Reason step by step about how well the material satisfies the criterion.
3. Finish with a final line of exactly the form "Score: N", where N is an integer from 1 (poor) to 5 (excellent).

{payload}
Reason step by step, then give the final "Score: N" line."""

_SCORE_RE = re.compile(r"(?<![0-9A-Za-z_.-])([1-5])(?![0-9A-Za-z_.])")


@dataclass
class EvalResult:
    dimension: str
    score: int | None
    rationale: str
    inputs_fingerprint: str
    flags: list[str] = field(default_factory=list)

    @property
    def evaluable(self) -> bool:
        return self.score is not None

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "score": self.score,
            "rationale": self.rationale,
            "inputs_fingerprint": self.inputs_fingerprint,
            "flags": self.flags,
        }


def parse_score(response: str) -> int:
    """First standalone integer 1-5 in the response; anything else fails."""
    m = _SCORE_RE.search(response)
    if not m:
        raise ScoreParseFailure(f"no standalone 1-5 score in {response[:80]!r}")
    return int(m.group(1))


def _fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def _judge(provider: ChatProvider, dimension: str, prompt: str, flags: list[str]) -> EvalResult:
    request = ChatRequest(system_prompt="", user_prompt=prompt, stage="judge")
    fingerprint = _fingerprint(prompt)
    response = ""
    for _ in range(2):  # one retry on parse failure
        response = provider.chat(request)
        try:
            score = parse_score(response)
        except ScoreParseFailure:
            continue
        return EvalResult(dimension, score, response.strip(), fingerprint, flags)
    return EvalResult(dimension, None, response.strip(), fingerprint, flags + ["not_evaluable"])


def _not_evaluable(dimension: str, reason: str) -> EvalResult:
    return EvalResult(dimension, None, reason, "", ["not_evaluable", reason])


def eval_structure(
    query: str,
    outline: Outline,
    provider: ChatProvider,
    reference_toc: str | None = None,
) -> list[EvalResult]:
    """Score the outline on the five structure dimensions."""
    if not outline.roots:
        raise ValueError("outline is empty")
    toc_text = serialize_toc(outline)
    results: list[EvalResult] = []
    for dimension in STRUCTURE_DIMENSIONS:
        needs_reference = dimension == "structure.comprehensiveness_topics"
        if needs_reference and reference_toc is None:
            results.append(_not_evaluable(dimension, "missing_reference_toc"))
            continue
        payload = f"[Query]\n{query}\n\n[Outline]\n{toc_text}\n"
        if needs_reference:
            payload += f"\n[Reference Table of Contents]\n{reference_toc}\n"
        prompt = _JUDGE_TEMPLATE.format(criterion=_STRUCTURE_CRITERIA[dimension], payload=payload)
        results.append(_judge(provider, dimension, prompt, []))
    return results


def eval_content(
    heading: str,
    content: str,
    cited_paragraph_texts: list[str],
    provider: ChatProvider,
    reference_content: str | None = None,
) -> list[EvalResult]:
    """Score one section's content on the four content dimensions."""
    results: list[EvalResult] = []
    for dimension in CONTENT_DIMENSIONS:
        flags: list[str] = []
        payload = f"[Heading]\n{heading}\n\n[Content]\n{content}\n"
        if dimension == "content.citation_faithfulness":
            if cited_paragraph_texts:
                evidence = "\n".join(f"- {t}" for t in cited_paragraph_texts)
            else:
                evidence = "(no cited paragraphs)"
                flags.append("low_evidence")
            payload += f"\n[Cited Paragraphs]\n{evidence}\n"
        if dimension == "content.comprehensiveness":
            if reference_content is None:
                results.append(_not_evaluable(dimension, "missing_reference_content"))
                continue
            payload += f"\n[Reference Content]\n{reference_content}\n"
        prompt = _JUDGE_TEMPLATE.format(criterion=_CONTENT_CRITERIA[dimension], payload=payload)
        results.append(_judge(provider, dimension, prompt, flags))
    return results


@dataclass(frozen=True)
class AggregateCell:
    system: str
    dimension: str
    mean: float | None
    evaluated_count: int
    total_count: int


def aggregate(results: list[tuple[str, EvalResult]]) -> list[AggregateCell]:
    """Mean score per (system, dimension); not-evaluable results excluded
    from the mean but reported in total_count. Order-independent."""
    systems = sorted({system for system, _ in results})
    dimensions = sorted({r.dimension for _, r in results})
    cells: list[AggregateCell] = []
    for system in systems:
        for dimension in dimensions:
            cell = [r for s, r in results if s == system and r.dimension == dimension]
            scores = [r.score for r in cell if r.score is not None]
            mean = round(sum(scores) / len(scores), 2) if scores else None
            cells.append(AggregateCell(system, dimension, mean, len(scores), len(cell)))
    return cells


def summary_csv(cells: list[AggregateCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["system", "dimension", "mean", "n"])
    for cell in cells:
        mean = f"{cell.mean:.2f}" if cell.mean is not None else ""
        writer.writerow([cell.system, cell.dimension, mean, cell.evaluated_count])
    return buf.getvalue()


def results_jsonl(results: list[tuple[str, EvalResult]]) -> str:
    lines = [
        json.dumps({"system": system, **result.to_dict()}, sort_keys=True, ensure_ascii=False)
        for system, result in results
    ]
    return "\n".join(lines) + ("\n" if lines else "")
