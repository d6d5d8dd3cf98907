"""Keyphrase generation and the flat vector index.

Each paragraph is represented by model-extracted keyphrases (or, in the
ablation mode, its raw text), embedded, and stored in an immutable flat
index persisted as a little-endian binary file with a trailing CRC-32.
"""
from __future__ import annotations

import logging
import struct
import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Judgment, Paragraph, ParagraphRef
from .errors import CorruptIndex, EmptyCorpus, ParseMismatch, VersionMismatch
from .providers import ChatProvider, ChatRequest, EmbeddingProvider, tokenize

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"LXIX"
INDEX_VERSION = 1
_MODES = ("keyphrase", "paragraph")

KEYPHRASE_SYSTEM_PROMPT = (
    "You are an ECHR lawyer creating legal case-law guides that provide an "
    "in-depth overview of Convention case law on a particular Article or "
    "transversal theme. You will receive paragraphs extracted from case law; "
    "your task is to generate keywords that capture the essence of each "
    "paragraph, so these keywords reflect the relevant Article or theme and "
    "can be used to cluster cases, identify important cases, and generate "
    "the table of contents and content for the guides."
)

KEYPHRASE_USER_TEMPLATE = """[Instructions]
1. Make sure keywords reflect the overall context of the paragraph by linking the description of circumstances to the requirements provided as criteria for legal doctrines and norms;
2. Focus on keywords detailing the application of the substantive or procedural limb explaining the scope of application of the Article;
3. Map keywords that detail the application of the Article to a variety of persons such as victims, state agents, witnesses, and relatives, and those that depend on jurisdiction, material, or temporal scope;
4. Distinguish conditions for the application of the Article in the context of violence or force from conditions that detail other events such as accidents or industrial activities;
5. Identify key phrases that describe risks and operational choices, the creation and application of regulatory frameworks, and conditions for the responsibility and accountability of various actors;
6. Highlight keywords that describe thresholds or conditions concerning intensity, frequency, and ordering in assessing each of the above.

[Paragraphs]
{paragraphs}

Return ONLY the keywords: one line of comma-separated keywords per numbered paragraph, in the same order, and nothing else. Make sure to keep keywords in arguments together so they make sense."""


@dataclass(frozen=True)
class KeyphraseSet:
    ref: ParagraphRef
    phrases: tuple[str, ...]


@dataclass(frozen=True)
class VectorRecord:
    ref: ParagraphRef
    vector: np.ndarray  # unit-norm float32, shape (D,)
    indexed_text: str


class VectorIndex:
    """Immutable searchable snapshot of embedded paragraph representations."""

    def __init__(
        self,
        dimension: int,
        mode: str,
        records: list[VectorRecord],
        corpus_fingerprint: bytes,
    ) -> None:
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if len(corpus_fingerprint) != 32:
            raise ValueError("corpus_fingerprint must be 32 bytes")
        refs = [r.ref for r in records]
        if len(set(refs)) != len(refs):
            raise ValueError("duplicate refs in index")
        for r in records:
            if r.vector.shape != (dimension,):
                raise ValueError(f"record {r.ref} has dimension {r.vector.shape}, expected ({dimension},)")
        self.dimension = dimension
        self.mode = mode
        self.records = records
        self.corpus_fingerprint = corpus_fingerprint
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (
                np.vstack([r.vector for r in self.records])
                if self.records
                else np.zeros((0, self.dimension), dtype=np.float32)
            )
        return self._matrix

    @property
    def refs(self) -> list[ParagraphRef]:
        return [r.ref for r in self.records]


def _render_batch(paragraphs: list[Paragraph]) -> str:
    lines = [f"{i}. {' '.join(p.text.split())}" for i, p in enumerate(paragraphs, start=1)]
    return KEYPHRASE_USER_TEMPLATE.format(paragraphs="\n".join(lines))


def _parse_phrases(line: str) -> list[str]:
    seen: set[str] = set()
    phrases: list[str] = []
    for raw in line.split(","):
        phrase = raw.strip().strip(".")
        if not phrase:
            continue
        key = phrase.lower()
        if key in seen:
            continue
        seen.add(key)
        phrases.append(phrase)
    return phrases


def _fallback_phrases(paragraph: Paragraph) -> tuple[str, ...]:
    tokens = tokenize(paragraph.text)[:8]
    return tuple(tokens) if tokens else (paragraph.text.strip()[:40],)


def _keyphrase_call(provider: ChatProvider, paragraphs: list[Paragraph]) -> list[list[str]]:
    request = ChatRequest(
        system_prompt=KEYPHRASE_SYSTEM_PROMPT,
        user_prompt=_render_batch(paragraphs),
        stage="keyphrase",
    )
    response = provider.chat(request)
    lines = [line for line in response.splitlines() if line.strip()]
    if len(lines) != len(paragraphs):
        raise ParseMismatch(
            f"expected {len(paragraphs)} keyphrase lines, got {len(lines)}"
        )
    return [_parse_phrases(line) for line in lines]


def generate_keyphrases(
    judgment: Judgment,
    provider: ChatProvider,
    batch_size: int = 10,
) -> list[KeyphraseSet]:
    """One chat call per batch of same-judgment paragraphs.

    A response with the wrong line count is retried once, then each
    paragraph of the failing batch is prompted individually; a paragraph
    that still yields nothing falls back to its first 8 tokens.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not judgment.paragraphs:
        raise ValueError(f"judgment {judgment.item_id} has no paragraphs")

    out: list[KeyphraseSet] = []
    paragraphs = list(judgment.paragraphs)
    for start in range(0, len(paragraphs), batch_size):
        batch = paragraphs[start : start + batch_size]
        try:
            per_paragraph = _keyphrase_call(provider, batch)
        except ParseMismatch:
            logger.warning("keyphrase batch parse mismatch for %s; retrying once", judgment.item_id)
            try:
                per_paragraph = _keyphrase_call(provider, batch)
            except ParseMismatch:
                logger.warning("retry failed for %s; falling back to per-paragraph prompts", judgment.item_id)
                per_paragraph = []
                for p in batch:
                    try:
                        per_paragraph.append(_keyphrase_call(provider, [p])[0])
                    except ParseMismatch:
                        per_paragraph.append([])
        for p, phrases in zip(batch, per_paragraph):
            out.append(KeyphraseSet(p.ref, tuple(phrases) if phrases else _fallback_phrases(p)))
    return out


def build_index(
    corpus: Corpus,
    embedder: EmbeddingProvider,
    chat: ChatProvider | None = None,
    mode: str = "keyphrase",
    batch_size: int = 10,
) -> VectorIndex:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    if len(corpus) == 0:
        raise EmptyCorpus("cannot index an empty corpus")
    if mode == "keyphrase" and chat is None:
        raise ValueError("keyphrase mode requires a chat provider")

    refs: list[ParagraphRef] = []
    texts: list[str] = []
    for judgment in corpus.judgments:
        if mode == "keyphrase":
            assert chat is not None
            for ks in generate_keyphrases(judgment, chat, batch_size=batch_size):
                refs.append(ks.ref)
                texts.append(", ".join(ks.phrases))
        else:
            for p in judgment.paragraphs:
                refs.append(p.ref)
                texts.append(p.text)

    vectors = embedder.embed(texts)
    records = [
        VectorRecord(ref, vectors[i].astype(np.float32), texts[i]) for i, ref in enumerate(refs)
    ]
    return VectorIndex(embedder.dimension, mode, records, corpus.fingerprint)


def _pack_str(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack("<I", len(data)) + data


def save_index(index: VectorIndex, path: str | Path) -> None:
    parts: list[bytes] = [
        INDEX_MAGIC,
        struct.pack("<I", INDEX_VERSION),
        struct.pack("<I", index.dimension),
        struct.pack("<B", _MODES.index(index.mode)),
        struct.pack("<Q", len(index.records)),
        index.corpus_fingerprint,
    ]
    for record in index.records:
        parts.append(_pack_str(record.ref.judgment_id))
        parts.append(struct.pack("<I", record.ref.number))
        parts.append(record.vector.astype("<f4").tobytes())
        parts.append(_pack_str(record.indexed_text))
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptIndex("index file truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def load_index(path: str | Path, expected_fingerprint: bytes | None = None) -> VectorIndex:
    """Load a persisted index; round-trips bit-exactly with save_index.

    When ``expected_fingerprint`` is given and differs from the stored
    corpus fingerprint, a warning is emitted (index built under another
    corpus) but the load proceeds.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise CorruptIndex("index file truncated")
    body, stored_crc = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) != stored_crc:
        raise CorruptIndex("checksum mismatch")

    reader = _Reader(body)
    if reader.take(4) != INDEX_MAGIC:
        raise CorruptIndex("bad magic")
    version = reader.u32()
    if version != INDEX_VERSION:
        raise VersionMismatch(f"index version {version}, expected {INDEX_VERSION}")
    dimension = reader.u32()
    mode = _MODES[struct.unpack("<B", reader.take(1))[0]]
    count = reader.u64()
    fingerprint = reader.take(32)

    records: list[VectorRecord] = []
    for _ in range(count):
        judgment_id = reader.string()
        number = reader.u32()
        vector = np.frombuffer(reader.take(4 * dimension), dtype="<f4").copy()
        indexed_text = reader.string()
        records.append(VectorRecord(ParagraphRef(judgment_id, number), vector, indexed_text))
    if reader.pos != len(body):
        raise CorruptIndex("trailing bytes after records")

    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        warnings.warn(
            "index corpus fingerprint does not match the loaded corpus",
            stacklevel=2,
        )
    return VectorIndex(dimension, mode, records, fingerprint)
