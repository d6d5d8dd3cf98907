"""Paragraph-segmented case-law corpus: loading, lookup, fuzzy search.

The corpus arrives as UTF-8 line-delimited JSON, one judgment per line:
``{"item_id": ..., "case_name": ..., "date": ..., "paragraphs": [{"number": ..., "text": ...}]}``.
Judgments are keyed by a HUDOC-style item id; paragraphs are the atomic
retrieval and citation unit, addressed by (judgment id, paragraph number).
"""
from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, EmptyQuery, FileNotFound, NotFound


@dataclass(frozen=True, order=True)
class ParagraphRef:
    judgment_id: str
    number: int

    def __str__(self) -> str:
        return f"{self.judgment_id}#{self.number}"


@dataclass(frozen=True)
class Paragraph:
    judgment_id: str
    number: int
    text: str

    @property
    def ref(self) -> ParagraphRef:
        return ParagraphRef(self.judgment_id, self.number)


@dataclass(frozen=True)
class Judgment:
    item_id: str
    case_name: str
    date: str
    paragraphs: tuple[Paragraph, ...]


@dataclass
class CorpusStats:
    judgment_count: int
    paragraph_count: int
    rejected_records: list[tuple[int, str]] = field(default_factory=list)


def _trigrams(s: str) -> frozenset[str]:
    s = " ".join(s.lower().split())
    if len(s) < 3:
        return frozenset({s}) if s else frozenset()
    return frozenset(s[i : i + 3] for i in range(len(s) - 2))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / len(a | b)


def _parse_judgment(obj: dict) -> Judgment:
    item_id = obj.get("item_id")
    if not isinstance(item_id, str) or not item_id.strip():
        raise ValueError("item_id missing or empty")
    case_name = obj.get("case_name")
    if not isinstance(case_name, str):
        raise ValueError("case_name missing")
    date = obj.get("date")
    if not isinstance(date, str):
        raise ValueError("date missing")
    datetime.date.fromisoformat(date)  # raises ValueError on bad dates
    raw_paragraphs = obj.get("paragraphs")
    if not isinstance(raw_paragraphs, list) or not raw_paragraphs:
        raise ValueError("paragraphs missing or empty")

    paragraphs: list[Paragraph] = []
    prev_number = 0
    for p in raw_paragraphs:
        if not isinstance(p, dict):
            raise ValueError("paragraph entry is not an object")
        number = p.get("number")
        if not isinstance(number, int) or isinstance(number, bool) or number <= 0:
            raise ValueError(f"paragraph number {number!r} not a positive integer")
        if number <= prev_number:
            raise ValueError(f"paragraph numbers not strictly increasing at {number}")
        text = p.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ValueError(f"paragraph {number} text empty")
        paragraphs.append(Paragraph(item_id, number, text))
        prev_number = number
    return Judgment(item_id, case_name, date, tuple(paragraphs))


class Corpus:
    """Immutable-after-ingest collection of judgments.

    Safe for concurrent reads once :meth:`ingest` has returned.
    """

    def __init__(self) -> None:
        self._judgments: dict[str, Judgment] = {}
        self._paragraphs: dict[ParagraphRef, Paragraph] = {}
        self.fingerprint: bytes = b"\x00" * 32
        self.stats: CorpusStats | None = None

    def __len__(self) -> int:
        return len(self._judgments)

    @property
    def judgments(self) -> list[Judgment]:
        return list(self._judgments.values())

    def ingest(self, path: str | Path) -> CorpusStats:
        path = Path(path)
        if not path.exists():
            raise FileNotFound(f"corpus file not found: {path}")
        data = path.read_bytes()
        self.fingerprint = hashlib.sha256(data).digest()

        rejected: list[tuple[int, str]] = []
        for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                judgment = _parse_judgment(obj)
                if judgment.item_id in self._judgments:
                    raise ValueError(f"duplicate item_id {judgment.item_id}")
            except (json.JSONDecodeError, ValueError) as exc:
                rejected.append((lineno, str(exc)))
                continue
            self._judgments[judgment.item_id] = judgment
            for p in judgment.paragraphs:
                self._paragraphs[p.ref] = p

        if not self._judgments:
            raise EmptyCorpus(f"no valid judgments in {path}")
        self.stats = CorpusStats(
            judgment_count=len(self._judgments),
            paragraph_count=len(self._paragraphs),
            rejected_records=rejected,
        )
        return self.stats

    def export(self, path: str | Path) -> None:
        """Write the loaded corpus back out in the ingest format."""
        with open(path, "w", encoding="utf-8") as fh:
            for judgment in self._judgments.values():
                obj = {
                    "item_id": judgment.item_id,
                    "case_name": judgment.case_name,
                    "date": judgment.date,
                    "paragraphs": [
                        {"number": p.number, "text": p.text} for p in judgment.paragraphs
                    ],
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")

    def get_judgment(self, item_id: str) -> Judgment:
        try:
            return self._judgments[item_id]
        except KeyError:
            raise NotFound(f"unknown judgment {item_id!r}") from None

    def get_paragraph(self, ref: ParagraphRef) -> Paragraph:
        try:
            return self._paragraphs[ref]
        except KeyError:
            raise NotFound(f"dangling citation {ref}") from None

    def has(self, ref: ParagraphRef) -> bool:
        return ref in self._paragraphs

    def all_refs(self) -> list[ParagraphRef]:
        return list(self._paragraphs.keys())

    def paragraphs(self) -> list[Paragraph]:
        return list(self._paragraphs.values())

    def fuzzy_search(self, query: str, limit: int) -> list[tuple[ParagraphRef, float]]:
        """Rank paragraphs by character-trigram Jaccard similarity.

        Each paragraph is scored as the max over two fields: the case name
        alone, and case name + " " + the first 500 chars of the paragraph
        text. Ties break by (judgment_id, number) ascending.
        """
        if not query.strip():
            raise EmptyQuery("fuzzy search query is empty")
        if limit < 1:
            raise ValueError("limit must be >= 1")
        q = _trigrams(query)
        scored: list[tuple[float, ParagraphRef]] = []
        for judgment in self._judgments.values():
            name_grams = _trigrams(judgment.case_name)
            for p in judgment.paragraphs:
                combined = _trigrams(judgment.case_name + " " + p.text[:500])
                score = max(_jaccard(q, name_grams), _jaccard(q, combined))
                scored.append((score, p.ref))
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [(ref, score) for score, ref in scored[:limit]]
