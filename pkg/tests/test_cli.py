from __future__ import annotations

import json
import time

import pytest

from fixture_corpus import write_fixture_corpus

from caselawgen.cli import main
from caselawgen.report import load_session

PIPELINE_QUERY = (
    "detention custody liberty privacy surveillance correspondence "
    "torture treatment consent expression press journalist"
)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    write_fixture_corpus(tmp / "corpus.jsonl")
    return tmp


def _run_pipeline(tmp, session="session.json", extra_query=(), extra_outline=(), extra_index=()):
    corpus = str(tmp / "corpus.jsonl")
    index = str(tmp / "index.bin")
    assert main(["index", "--corpus", corpus, "--out", index, "--seed-mock", *extra_index]) == 0
    assert main([
        "query", "--corpus", corpus, "--index", index, "--q", PIPELINE_QUERY,
        "--session", str(tmp / session), "--seed-mock", *extra_query,
    ]) == 0
    assert main([
        "outline", "--corpus", corpus, "--index", index,
        "--session", str(tmp / session), "--seed-mock", *extra_outline,
    ]) == 0
    assert main([
        "generate", "--corpus", corpus, "--index", index,
        "--session", str(tmp / session), "--seed-mock",
    ]) == 0
    assert main([
        "report", "--session", str(tmp / session), "--format", "md",
        "--out", str(tmp / "report.md"),
    ]) == 0


def test_full_offline_run_under_60s(workdir, capsys):
    start = time.monotonic()
    assert main(["ingest", "--corpus", str(workdir / "corpus.jsonl")]) == 0
    _run_pipeline(workdir)
    assert time.monotonic() - start < 60
    report = load_session(workdir / "session.json")
    assert report.outline is not None
    assert report.sections
    capsys.readouterr()


def test_lambda_one_equals_relevance_mode(workdir, capsys):
    corpus = str(workdir / "corpus.jsonl")
    index = str(workdir / "index.bin")
    for session, flags in (
        ("lam1.json", ["--lambda", "1.0", "--mode", "mmr"]),
        ("rel.json", ["--mode", "relevance"]),
    ):
        assert main([
            "query", "--corpus", corpus, "--index", index, "--q", PIPELINE_QUERY,
            "--session", str(workdir / session), "--seed-mock", *flags,
        ]) == 0
    capsys.readouterr()
    lam1 = load_session(workdir / "lam1.json")
    rel = load_session(workdir / "rel.json")
    assert [h.ref for h in lam1.hits] == [h.ref for h in rel.hits]


def test_no_reorganize_matches_concat_fallback(workdir, capsys):
    corpus = str(workdir / "corpus.jsonl")
    index_path = str(workdir / "index.bin")
    assert main([
        "query", "--corpus", corpus, "--index", index_path, "--q", PIPELINE_QUERY,
        "--session", str(workdir / "ablate.json"), "--seed-mock",
    ]) == 0
    assert main([
        "outline", "--corpus", corpus, "--index", index_path,
        "--session", str(workdir / "ablate.json"), "--seed-mock", "--no-reorganize",
    ]) == 0
    capsys.readouterr()
    report = load_session(workdir / "ablate.json")
    assert report.pipeline_mode["reorganize"] is False

    # independent reconstruction of the expected fallback outline
    from caselawgen.corpus import Corpus
    from caselawgen.indexer import load_index
    from caselawgen.pipeline import build_outline, make_providers

    c = Corpus()
    c.ingest(corpus)
    chat, _ = make_providers(c, mock=True)
    expected = build_outline(report.hits, load_index(index_path), c, chat, reorganize_enabled=False)
    assert [r.title for r in report.outline.roots] == [r.title for r in expected.roots]
    assert all(not r.children for r in report.outline.roots)


def test_generate_single_node(workdir, capsys):
    corpus = str(workdir / "corpus.jsonl")
    index = str(workdir / "index.bin")
    session = workdir / "single.json"
    assert main([
        "query", "--corpus", corpus, "--index", index, "--q", PIPELINE_QUERY,
        "--session", str(session), "--seed-mock",
    ]) == 0
    assert main([
        "outline", "--corpus", corpus, "--index", index, "--session", str(session), "--seed-mock",
    ]) == 0
    report = load_session(session)
    leaf = report.outline.leaves()[0]
    assert main([
        "generate", "--corpus", corpus, "--index", index, "--session", str(session),
        "--seed-mock", "--node", leaf.node_id,
    ]) == 0
    capsys.readouterr()
    report = load_session(session)
    assert set(report.sections) == {leaf.node_id}


def test_eval_content_writes_csv(workdir, capsys, tmp_path):
    _run_pipeline(workdir, session="evalsess.json")
    reference = tmp_path / "ref.txt"
    reference.write_text("Reference content about the topics.")
    out_csv = tmp_path / "summary.csv"
    out_jsonl = tmp_path / "raw.jsonl"
    assert main([
        "eval", "content", "--session", str(workdir / "evalsess.json"),
        "--corpus", str(workdir / "corpus.jsonl"), "--seed-mock",
        "--reference", str(reference), "--out-csv", str(out_csv), "--out-jsonl", str(out_jsonl),
    ]) == 0
    capsys.readouterr()
    rows = out_csv.read_text().strip().splitlines()
    assert rows[0] == "system,dimension,mean,n"
    assert len(rows) == 1 + 4  # four content dimensions
    assert all(",4.00," in row for row in rows[1:])
    assert out_jsonl.read_text().strip()


def test_usage_error_missing_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["query"])  # missing required flags
    assert exc.value.code == 1
    assert "usage error" in capsys.readouterr().err


def test_usage_error_bad_threshold(workdir, capsys):
    rc = main([
        "query", "--corpus", str(workdir / "corpus.jsonl"), "--index", str(workdir / "index.bin"),
        "--q", "x", "--threshold", "1.5", "--session", str(workdir / "nope.json"), "--seed-mock",
    ])
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_pipeline_error_missing_index(workdir, capsys):
    rc = main([
        "query", "--corpus", str(workdir / "corpus.jsonl"), "--index", "/nonexistent/index.bin",
        "--q", "x", "--session", str(workdir / "nope.json"), "--seed-mock",
    ])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_pipeline_error_outline_without_hits(workdir, tmp_path, capsys):
    # a session file with hits stripped out
    session = json.loads((workdir / "session.json").read_text())
    session["hits"] = []
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(session))
    rc = main([
        "outline", "--corpus", str(workdir / "corpus.jsonl"), "--index", str(workdir / "index.bin"),
        "--session", str(broken), "--seed-mock",
    ])
    assert rc == 2
    assert "no hits" in capsys.readouterr().err


def test_report_requires_outline(workdir, tmp_path, capsys):
    session = json.loads((workdir / "session.json").read_text())
    session["outline"] = None
    broken = tmp_path / "no_outline.json"
    broken.write_text(json.dumps(session))
    rc = main(["report", "--session", str(broken)])
    assert rc == 2
    capsys.readouterr()


def test_paragraph_mode_ablation_recorded(workdir, capsys):
    corpus = str(workdir / "corpus.jsonl")
    index = str(workdir / "para_index.bin")
    assert main(["index", "--corpus", corpus, "--mode", "paragraph", "--out", index, "--seed-mock"]) == 0
    assert main([
        "query", "--corpus", corpus, "--index", index, "--q", PIPELINE_QUERY,
        "--threshold", "0.1", "--session", str(workdir / "para.json"), "--seed-mock",
    ]) == 0
    capsys.readouterr()
    report = load_session(workdir / "para.json")
    assert report.pipeline_mode["index_mode"] == "paragraph"
    assert report.params_snapshot["index"]["mode"] == "paragraph"
