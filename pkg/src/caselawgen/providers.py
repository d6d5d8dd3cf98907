"""Chat-completion and embedding backends.

Real providers speak JSON-over-HTTP in the request shapes used by widely
deployed open inference servers (``/chat/completions``, ``/embeddings``),
so any compatible endpoint can be plugged in via :class:`ProviderConfig`.
Mock providers are pure functions of their inputs plus corpus statistics,
giving byte-reproducible offline runs.
"""
from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import requests

from .corpus import Corpus
from .errors import DimensionMismatch, ProviderUnavailable, ResponseEmpty, UnknownStage

logger = logging.getLogger(__name__)

EMBED_BATCH_LIMIT = 128
PIPELINE_STAGES = ("keyphrase", "topic_label", "reorganize", "content", "judge")

BACKOFF_BASE_SECONDS = 1.0
BACKOFF_FACTOR = 2.0


@dataclass
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    stage: str | None = None

    def __post_init__(self) -> None:
        if not self.user_prompt:
            raise ValueError("user_prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass
class ProviderConfig:
    endpoint_url: str = ""
    model_id: str = ""
    api_key_env_var: str = ""
    timeout: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def normalize(vec: np.ndarray) -> np.ndarray:
    """Unit-normalize; a zero vector maps to the e_0 basis vector."""
    vec = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out.astype(np.float32)
    return (vec / norm).astype(np.float32)


class _TransientFailure(Exception):
    pass


class _BoundedRetryingClient:
    """Shared transport policy: semaphore-bounded, exponential-backoff retry."""

    def __init__(self, config: ProviderConfig, sleep=time.sleep) -> None:
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self._sleep = sleep
        self.last_attempts = 0

    def _call_with_retries(self, fn, what: str):
        attempts = 0
        while True:
            attempts += 1
            try:
                with self._semaphore:
                    result = fn()
                self.last_attempts = attempts
                return result
            except _TransientFailure as exc:
                if attempts > self.config.max_retries:
                    self.last_attempts = attempts
                    raise ProviderUnavailable(
                        f"{what} failed after {attempts} attempt(s): {exc}"
                    ) from exc
                delay = BACKOFF_BASE_SECONDS * BACKOFF_FACTOR ** (attempts - 1)
                logger.warning("%s attempt %d failed (%s); retrying in %.1fs", what, attempts, exc, delay)
                self._sleep(delay)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_var, "") if self.config.api_key_env_var else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, session, path: str, payload: dict) -> dict:
        url = self.config.endpoint_url.rstrip("/") + path
        if self.config.verbose:
            logger.debug("POST %s %s", url, {k: v for k, v in payload.items() if k != "input"})
        try:
            response = session.post(url, json=payload, headers=self._headers(), timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise _TransientFailure(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise _TransientFailure(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderUnavailable(f"HTTP {response.status_code}: {response.text[:500]}")
        if self.config.verbose:
            logger.debug("response %s: %d bytes", url, len(response.content))
        return response.json()


class ChatProvider:
    """Interface: chat(request) -> model text."""

    def chat(self, request: ChatRequest) -> str:
        raise NotImplementedError


class EmbeddingProvider:
    """Interface: embed(texts) -> (n, D) array of unit-norm float32 vectors.

    ``embed`` chunks transport requests into sub-batches of at most
    ``EMBED_BATCH_LIMIT`` texts, preserving input order.
    """

    dimension: int

    def embed(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed requires at least one text")
        if any(not t for t in texts):
            raise ValueError("embed texts must be non-empty")
        chunks = [texts[i : i + EMBED_BATCH_LIMIT] for i in range(0, len(texts), EMBED_BATCH_LIMIT)]
        rows: list[np.ndarray] = []
        for chunk in chunks:
            batch = self._embed_batch(chunk)
            if batch.shape != (len(chunk), self.dimension):
                raise DimensionMismatch(
                    f"provider returned shape {batch.shape}, expected ({len(chunk)}, {self.dimension})"
                )
            rows.append(batch)
        return np.vstack(rows)

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError


class HttpChatProvider(ChatProvider, _BoundedRetryingClient):
    def __init__(self, config: ProviderConfig, session=None, sleep=time.sleep) -> None:
        _BoundedRetryingClient.__init__(self, config, sleep=sleep)
        self._session = session or requests.Session()

    def chat(self, request: ChatRequest) -> str:
        payload = {
            "model": self.config.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

        def once() -> str:
            data = self._post(self._session, "/chat/completions", payload)
            try:
                text = data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise _TransientFailure(f"malformed chat response: {exc}") from exc
            return text or ""

        text = self._call_with_retries(once, "chat")
        if not text.strip():
            raise ResponseEmpty("provider returned an empty completion")
        return text


class HttpEmbeddingProvider(EmbeddingProvider, _BoundedRetryingClient):
    def __init__(self, config: ProviderConfig, dimension: int, session=None, sleep=time.sleep) -> None:
        _BoundedRetryingClient.__init__(self, config, sleep=sleep)
        self.dimension = dimension
        self._session = session or requests.Session()

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        payload = {"model": self.config.model_id, "input": texts}

        def once() -> np.ndarray:
            data = self._post(self._session, "/embeddings", payload)
            try:
                rows = [item["embedding"] for item in data["data"]]
            except (KeyError, TypeError) as exc:
                raise _TransientFailure(f"malformed embedding response: {exc}") from exc
            return np.asarray(rows, dtype=np.float64)

        raw = self._call_with_retries(once, "embed")
        if raw.ndim != 2 or raw.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"provider returned dimension {raw.shape[-1] if raw.ndim == 2 else '?'}, expected {self.dimension}"
            )
        return np.vstack([normalize(row) for row in raw])


# --- deterministic mocks -------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics; shared by the mocks."""
    return _TOKEN_RE.findall(text.lower())


def _token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def mock_embed(text: str, dim: int = 256) -> np.ndarray:
    """Hashed bag-of-words embedding: signed buckets, L2-normalized.

    Token-free inputs (and exact cancellations) map to e_0, keeping every
    output a unit vector.
    """
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        h = _token_hash(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    return normalize(vec)


class MockEmbeddingProvider(EmbeddingProvider):
    """Deterministic offline embedder; records transport sub-batch sizes."""

    def __init__(self, dimension: int = 256) -> None:
        self.dimension = dimension
        self.batch_sizes: list[int] = []

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        self.batch_sizes.append(len(texts))
        return np.vstack([mock_embed(t, self.dimension) for t in texts])


def _block(lines: list[str], header: str) -> list[str]:
    """Lines strictly between ``header`` and the next [Bracketed] header."""
    out: list[str] = []
    collecting = False
    for line in lines:
        if line.strip() == header:
            collecting = True
            continue
        if collecting:
            if re.match(r"^\[[A-Za-z ]+\]$", line.strip()):
                break
            out.append(line)
    return out


_NUMBERED_RE = re.compile(r"^\d+\.\s(.*)$")
_PARA_LINE_RE = re.compile(r"^([^\s#()]+)#(\d+): (.*)$")


@dataclass
class MockChatProvider(ChatProvider):
    """Stage-tagged deterministic chat oracle.

    Outputs depend only on the request plus corpus document-frequency
    statistics; ``stages`` records the call trace for contract tests.
    """

    doc_freq: Counter = field(default_factory=Counter)
    stages: list[str] = field(default_factory=list)

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "MockChatProvider":
        df: Counter = Counter()
        for paragraph in corpus.paragraphs():
            df.update(set(tokenize(paragraph.text)))
        return cls(doc_freq=df)

    def chat(self, request: ChatRequest) -> str:
        if request.stage not in PIPELINE_STAGES:
            raise UnknownStage(f"mock chat needs a pipeline stage tag, got {request.stage!r}")
        self.stages.append(request.stage)
        handler = getattr(self, f"_stage_{request.stage}")
        return handler(request.user_prompt)

    # keyphrase: per paragraph, the 5 rarest tokens by corpus document
    # frequency (ties by token), comma-joined, one line per paragraph.
    def rare_tokens(self, text: str, n: int = 5) -> list[str]:
        unique = sorted(set(tokenize(text)))
        unique.sort(key=lambda t: (self.doc_freq.get(t, 0), t))
        return unique[:n]

    def _stage_keyphrase(self, prompt: str) -> str:
        texts = [m.group(1) for line in _block(prompt.splitlines(), "[Paragraphs]") if (m := _NUMBERED_RE.match(line))]
        return "\n".join(", ".join(self.rare_tokens(t)) for t in texts)

    # topic_label: "topic: " + the 3 most frequent keyphrase tokens across
    # the representatives (ties by token).
    def _stage_topic_label(self, prompt: str) -> str:
        texts = [line[2:] for line in prompt.splitlines() if line.startswith("- ")]
        counts: Counter = Counter()
        for t in texts:
            counts.update(self.rare_tokens(t))
        top = sorted(counts, key=lambda tok: (-counts[tok], tok))[:3]
        return "topic: " + ", ".join(top)

    # reorganize: input topics sorted lexicographically, children nested
    # with 4-space indentation.
    def _stage_reorganize(self, prompt: str) -> str:
        entries: list[tuple[str, list[str]]] = []
        for line in _block(prompt.splitlines(), "[Topics]"):
            if not line.strip() or line.strip().startswith("Please only return"):
                continue
            if line.startswith("    "):
                if entries:
                    entries[-1][1].append(line.strip())
            else:
                entries.append((line.strip(), []))
        entries.sort(key=lambda e: e[0])
        lines: list[str] = []
        for title, children in entries:
            lines.append(title)
            lines.extend("    " + c for c in sorted(children))
        return "\n".join(lines)

    # content: extends previous content with one citing sentence per
    # provided paragraph.
    def _stage_content(self, prompt: str) -> str:
        lines = prompt.splitlines()
        previous = "\n".join(_block(lines, "[Previous Content]")).strip()
        sentences: list[str] = []
        for line in _block(lines, "[Paragraphs]"):
            m = _PARA_LINE_RE.match(line)
            if not m:
                continue
            judgment_id, number, text = m.group(1), m.group(2), m.group(3)
            lead = " ".join(text.split()[:8])
            sentences.append(f"The case law establishes that {lead} ({judgment_id}#{number}).")
        body = " ".join(sentences)
        return f"{previous}\n{body}" if previous else body

    def _stage_judge(self, prompt: str) -> str:
        return "4"
