from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # fixture_corpus / reference_impls

from fixture_corpus import (  # noqa: E402
    write_blob_corpus,
    write_fixture_corpus,
    write_near_duplicate_corpus,
)

from caselawgen.corpus import Corpus  # noqa: E402
from caselawgen.indexer import build_index  # noqa: E402
from caselawgen.providers import MockChatProvider, MockEmbeddingProvider  # noqa: E402


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose per-phase outcome to fixtures (acceptance pass/fail banner)
    outcome = yield
    report = outcome.get_result()
    setattr(item, f"rep_{report.when}", report)


@pytest.fixture(scope="session")
def fixture_corpus_path(tmp_path_factory) -> Path:
    return write_fixture_corpus(tmp_path_factory.mktemp("corpus") / "fixture.jsonl")


@pytest.fixture(scope="session")
def fixture_corpus(fixture_corpus_path) -> Corpus:
    corpus = Corpus()
    corpus.ingest(fixture_corpus_path)
    return corpus


@pytest.fixture(scope="session")
def dup_corpus_path(tmp_path_factory) -> Path:
    return write_near_duplicate_corpus(tmp_path_factory.mktemp("corpus") / "dups.jsonl")


@pytest.fixture(scope="session")
def dup_corpus(dup_corpus_path) -> Corpus:
    corpus = Corpus()
    corpus.ingest(dup_corpus_path)
    return corpus


@pytest.fixture(scope="session")
def blob_corpus_path(tmp_path_factory) -> Path:
    return write_blob_corpus(tmp_path_factory.mktemp("corpus") / "blobs.jsonl")


@pytest.fixture(scope="session")
def blob_corpus(blob_corpus_path) -> Corpus:
    corpus = Corpus()
    corpus.ingest(blob_corpus_path)
    return corpus


@pytest.fixture()
def mock_embedder() -> MockEmbeddingProvider:
    return MockEmbeddingProvider()


@pytest.fixture()
def mock_chat(fixture_corpus) -> MockChatProvider:
    return MockChatProvider.from_corpus(fixture_corpus)


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus):
    chat = MockChatProvider.from_corpus(fixture_corpus)
    return build_index(fixture_corpus, MockEmbeddingProvider(), chat, mode="keyphrase")
